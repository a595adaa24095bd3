#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "xbar/surrogate.hpp"

using namespace xbar;
using namespace xbar::surrogate;

namespace {

topology::CrossbarConfig small(int n) {
    topology::CrossbarConfig c;
    c.rows = n;
    c.cols = 1;
    return c;
}

Dataset smoke_dataset(std::size_t records = 3000) {
    const auto cfg = small(16);
    const auto model = topology::make_model(cfg);
    DatasetOptions o;
    o.records = records;
    o.seed = 11;
    return generate_dataset(cfg, model, metrics::WorkloadSampler::mixed(), o);
}

std::vector<TrainRecord> random_records(int inputs, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<TrainRecord> out(count);
    for (auto& r : out) {
        r.features.resize(inputs);
        for (auto& f : r.features) f = u(rng);
        r.target = 0.3 * u(rng);
    }
    return out;
}

}  // namespace

TEST_CASE("backprop matches central finite differences") {
    for (auto act : {Activation::Tanh, Activation::Sigmoid, Activation::Relu})
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto net = make_net(8, 5, act, seed);
            net.target_scale = 0.7;
            std::mt19937_64 rng(seed);
            for (int i = 0; i < 8; ++i) {
                net.feature_mean[i] = 0.1 * (double(rng() % 7) - 3);
                net.feature_scale[i] = 0.5 + double(rng() % 5) * 0.25;
            }
            auto p = net.parameters();
            for (std::size_t k = 0; k < p.size(); ++k) p[k] += 0.05 * (double(rng() % 11) - 5) / 5.0;
            net.set_parameters(p);
            const auto batch = random_records(8, 4, seed + 10);
            std::vector<double> grad;
            loss_and_gradient(net, batch, &grad);
            REQUIRE(grad.size() == p.size());
            const double h = 1e-5;
            for (std::size_t k = 0; k < p.size(); ++k) {
                auto q = p;
                q[k] = p[k] + h;
                net.set_parameters(q);
                const double up = loss_and_gradient(net, batch, nullptr);
                q[k] = p[k] - h;
                net.set_parameters(q);
                const double dn = loss_and_gradient(net, batch, nullptr);
                const double fd = (up - dn) / (2 * h);
                CAPTURE(k);
                CAPTURE(to_string(act));
                CHECK(std::abs(fd - grad[k]) <= 1e-4 * std::max(std::abs(fd), std::abs(grad[k])) + 1e-9);
            }
            net.set_parameters(p);
        }
}

TEST_CASE("zero-parasitic data has zero targets and converges to zero") {
    auto cfg = small(8);
    cfg.parasitics = topology::ParasiticsConfig::zero();
    const auto model = topology::make_model(cfg);
    DatasetOptions o;
    o.records = 400;
    const auto d = generate_dataset(cfg, model, metrics::WorkloadSampler::bernoulli(0.5), o);
    REQUIRE(d.size() > 0);
    for (const auto& r : d.train) CHECK(std::abs(r.target) <= 1e-12);
    Hyper h;
    h.hidden = 8;
    h.epochs = 200;
    const auto res = train(d, h);
    CHECK(res.train_mse <= 1e-8);
    CHECK(res.test_mse <= 1e-8);
    const auto p = predict(res.net, d.test.front().features, d.test.front().i_ideal);
    CHECK(p.i_nonideal == doctest::Approx(d.test.front().i_ideal).epsilon(1e-3));
}

TEST_CASE("dataset bookkeeping and features") {
    const auto cfg = small(16);
    const auto model = topology::make_model(cfg);
    DatasetOptions o;
    o.records = 500;
    const auto d = generate_dataset(cfg, model, metrics::WorkloadSampler::bernoulli(0.5), o);
    CHECK(d.size() == d.requested - d.excluded - d.failed);
    CHECK(d.test.size() == d.size() / 5);
    for (const auto& r : d.train) {
        REQUIRE(r.features.size() == 32);
        for (int i = 0; i < 16; ++i) CHECK((r.features[i] == 0.0 || r.features[i] == 1.0));
        for (int i = 16; i < 32; ++i) {
            CHECK(r.features[i] >= 0.0);
            CHECK(r.features[i] <= 1.0 + 1e-12);
        }
        CHECK(std::isfinite(r.target));
        CHECK(r.nf() == std::abs(r.target));
    }
    // A PWA dataset masks every record to one group.
    auto pwa = small(16);
    pwa.activation = topology::Activation::partial_rows(4);
    const auto dp = generate_dataset(pwa, model, metrics::WorkloadSampler::bernoulli(1.0), o);
    for (const auto& r : dp.train) {
        int ones = 0;
        for (int i = 0; i < 16; ++i) ones += r.features[i] != 0.0;
        CHECK(ones == 4);
    }
    auto drain = cfg;
    drain.topology = Topology::DrainInput;
    CHECK_THROWS_AS(generate_dataset(drain, model, metrics::WorkloadSampler::bernoulli(0.5), o), DomainError);
}

TEST_CASE("training is deterministic, monotone and fits its own data") {
    const auto d = smoke_dataset();
    Hyper h;
    h.hidden = 32;
    h.epochs = 40;
    const auto a = train(d, h);
    const auto b = train(d, h);
    CHECK(a.net.parameters() == b.net.parameters());
    for (std::size_t e = 1; e < a.epoch_loss.size(); ++e) CHECK(a.epoch_loss[e] <= a.epoch_loss[e - 1]);
    const double bound = 3.0 * std::sqrt(a.train_mse);
    std::size_t within = 0;
    for (const auto& r : d.train)
        within += std::abs(a.net.predict(r.features) - r.target) <= bound ? 1 : 0;
    CHECK(double(within) >= 0.95 * double(d.train.size()));
    CHECK(a.test_mse < 1e-3);
    h.optimizer = Optimizer::Adam;
    h.learning_rate = 1e-3;
    const auto c = train(d, h);
    for (std::size_t e = 1; e < c.epoch_loss.size(); ++e) CHECK(c.epoch_loss[e] <= c.epoch_loss[e - 1]);
}

TEST_CASE("save and load are bit-exact") {
    const auto d = smoke_dataset(600);
    Hyper h;
    h.hidden = 12;
    h.epochs = 5;
    auto res = train(d, h);
    res.net.tech = "fefet";
    res.net.rows = 16;
    const auto dir = std::filesystem::temp_directory_path() / "xbar_surrogate_test";
    std::filesystem::create_directories(dir);
    save(res.net, dir / "net.json");
    const auto back = load(dir / "net.json");
    CHECK(back.parameters() == res.net.parameters());
    CHECK(back.tech == "fefet");
    for (const auto& r : d.test) CHECK(back.predict(r.features) == res.net.predict(r.features));
    std::filesystem::resize_file(dir / "net.bin", 8);
    CHECK_THROWS_AS(load(dir / "net.json"), UsageError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("prediction contract") {
    auto net = make_net(4, 3, Activation::Tanh, 5);
    const std::vector<double> f{1, 0, 1, 0.5};
    const auto zero = predict(net, f, 0.0);
    CHECK(zero.i_nonideal == 0.0);
    const auto p = predict(net, f, 2e-6);
    CHECK(p.i_nonideal == doctest::Approx(2e-6 * (1 - p.signed_dev)));
    CHECK(p.nf == std::abs(p.signed_dev));
    CHECK_THROWS_AS(predict(net, std::vector<double>{1, 2}, 1e-6), DomainError);
    CHECK_THROWS_AS(parse_activation("gelu"), UsageError);
    Dataset empty;
    CHECK_THROWS_AS(train(empty, Hyper{}), DomainError);
}

TEST_CASE("divergent training aborts with a diagnostic") {
    auto d = smoke_dataset(300);
    d.train.front().target = std::nan("");
    Hyper h;
    h.hidden = 4;
    h.epochs = 3;
    CHECK_THROWS_AS(train(d, h), ConvergenceError);
}
