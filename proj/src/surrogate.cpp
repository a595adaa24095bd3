#include "xbar/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include <json.hpp>

#include "xbar/blob.hpp"
#include "xbar/parallel.hpp"
#include "xbar/solver.hpp"
#include "xbar/variation.hpp"

namespace xbar::surrogate {

using json = nlohmann::json;
using topology::BitMatrix;
using topology::BitVector;

namespace {

double act(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Relu: return z > 0 ? z : 0.0;
    }
    return z;
}

// Derivative expressed through the activation value y = act(z) and z.
double act_prime(Activation a, double z, double y) {
    switch (a) {
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Sigmoid: return y * (1.0 - y);
        case Activation::Relu: return z > 0 ? 1.0 : 0.0;
    }
    return 1.0;
}

// Normalized feature matrix (inputs x records) and target row.
struct Batch {
    Eigen::MatrixXd x;
    Eigen::RowVectorXd t;
};

Batch make_batch(const SurrogateNet& net, std::span<const TrainRecord> recs) {
    Batch b;
    b.x.resize(net.inputs, static_cast<Eigen::Index>(recs.size()));
    b.t.resize(static_cast<Eigen::Index>(recs.size()));
    for (std::size_t k = 0; k < recs.size(); ++k) {
        if (recs[k].features.size() != std::size_t(net.inputs))
            throw DomainError("record feature length does not match the net");
        for (int i = 0; i < net.inputs; ++i)
            b.x(i, static_cast<Eigen::Index>(k)) = (recs[k].features[i] - net.feature_mean[i]) / net.feature_scale[i];
        b.t[static_cast<Eigen::Index>(k)] = recs[k].target;
    }
    return b;
}

// Forward + optional backward over a normalized batch (columns [lo, hi)).
double batch_loss(const SurrogateNet& net, const Eigen::MatrixXd& x, const Eigen::RowVectorXd& t,
                  std::vector<double>* grad) {
    const Eigen::Index n = x.cols();
    if (n == 0) throw DomainError("empty batch");
    Eigen::MatrixXd z = net.w1 * x;
    z.colwise() += net.b1;
    Eigen::MatrixXd a = z.unaryExpr([&](double v) { return act(net.activation, v); });
    Eigen::RowVectorXd y = (net.w2 * a).array() + net.b2;
    const Eigen::RowVectorXd err = net.target_scale * y - t;
    const double loss = err.squaredNorm() / double(n);
    if (grad) {
        const Eigen::RowVectorXd dy = (2.0 * net.target_scale / double(n)) * err;
        const Eigen::RowVectorXd gw2 = dy * a.transpose();
        const double gb2 = dy.sum();
        Eigen::MatrixXd dz = net.w2.transpose() * dy;
        for (Eigen::Index c = 0; c < dz.cols(); ++c)
            for (Eigen::Index r = 0; r < dz.rows(); ++r) dz(r, c) *= act_prime(net.activation, z(r, c), a(r, c));
        const Eigen::MatrixXd gw1 = dz * x.transpose();
        const Eigen::VectorXd gb1 = dz.rowwise().sum();
        grad->assign(net.parameter_count(), 0.0);
        std::size_t k = 0;
        for (int r = 0; r < net.hidden; ++r)
            for (int c = 0; c < net.inputs; ++c) (*grad)[k++] = gw1(r, c);
        for (int r = 0; r < net.hidden; ++r) (*grad)[k++] = gb1[r];
        for (int r = 0; r < net.hidden; ++r) (*grad)[k++] = gw2[r];
        (*grad)[k] = gb2;
    }
    return loss;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

std::vector<double> column_features(const devices::BitCellModel& model, double v_bl,
                                    std::span<const std::uint8_t> inputs,
                                    std::span<const std::uint8_t> weights, std::span<const double> scale) {
    if (inputs.size() != weights.size()) throw DomainError("feature inputs and weights differ in length");
    if (!scale.empty() && scale.size() != weights.size()) throw DomainError("feature scale length mismatch");
    const std::size_t n = inputs.size();
    const double g_on = devices::on_conductance(model);
    const double g[2] = {dse::stored_conductance(model, v_bl, 0) / g_on,
                         dse::stored_conductance(model, v_bl, 1) / g_on};
    std::vector<double> f(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        f[i] = inputs[i] ? 1.0 : 0.0;
        f[n + i] = g[weights[i] ? 1 : 0] * (scale.empty() ? 1.0 : scale[i]);
    }
    return f;
}

Dataset generate_dataset(const topology::CrossbarConfig& cfg, const devices::BitCellModel& model,
                         const metrics::WorkloadSampler& sampler, const DatasetOptions& opts) {
    cfg.validate();
    sampler.validate();
    if (cfg.topology != Topology::GateInput)
        throw DomainError("surrogate datasets need a gate-input array (columns must be independent)");
    if (opts.records < 1) throw DomainError("dataset needs at least one record");
    if (!(opts.test_fraction >= 0.0 && opts.test_fraction < 1.0))
        throw DomainError("test fraction must lie in [0, 1)");
    dse::VariationConfig vc{opts.sigma_frac, opts.seed};
    vc.validate();

    auto one = cfg;
    one.cols = 1;
    const auto groups = cfg.row_groups();
    const int n = cfg.rows;
    const bool ladder = solver::LadderColumn::supported(cfg);
    devices::CellCurve curves[2][2];
    for (int a : {0, 1})
        for (int b : {0, 1}) curves[a][b] = model.curve(a, b);

    struct Slot {
        std::optional<TrainRecord> rec;
        bool failed = false;
    };
    std::vector<Slot> slots(opts.records);
    const int workers = resolve_workers(opts.workers);
    std::vector<std::unique_ptr<solver::LadderColumn>> ladders(workers);

    parallel_for(opts.records, workers, [&](std::size_t r, int w) {
        auto rng = stream_rng(opts.seed, 0x53524753ull, r);
        BitMatrix weights(n, 1);
        BitVector inputs(n);
        sampler.draw(rng, weights, inputs);
        const auto masked = topology::mask_inputs(inputs, groups[r % groups.size()]);
        const auto scale = dse::variation_scales(model, cfg.v_bl, weights, vc, r);
        const double ideal = solver::device_ideal_output(one, model, weights, masked, scale)[0];
        if (ideal == 0.0) return;
        double real = 0.0;
        try {
            if (ladder) {
                if (!ladders[w])
                    ladders[w] = std::make_unique<solver::LadderColumn>(solver::LadderColumn::for_config(cfg));
                std::vector<devices::CellElement> cells(n);
                for (int i = 0; i < n; ++i) cells[i] = {curves[masked[i] ? 1 : 0][weights.bits[i] ? 1 : 0], scale[i]};
                real = ladders[w]->solve(cells, opts.solver).current;
            } else {
                real = solver::solve_dc(topology::build(one, model, weights, masked, scale), opts.solver)
                           .column_currents[0];
            }
        } catch (const ConvergenceError&) {
            slots[r].failed = true;
            return;
        }
        TrainRecord rec;
        rec.features = column_features(model, cfg.v_bl, masked, weights.bits, scale);
        rec.i_ideal = ideal;
        rec.i_nonideal = real;
        rec.target = (ideal - real) / ideal;
        slots[r].rec = std::move(rec);
    });

    Dataset d;
    d.requested = opts.records;
    // Deterministic split: every k-th record goes to the test set.
    const std::size_t period =
        opts.test_fraction > 0 ? std::max<std::size_t>(1, std::size_t(std::llround(1.0 / opts.test_fraction))) : 0;
    std::size_t kept = 0;
    for (auto& s : slots) {
        if (s.failed) {
            ++d.failed;
            continue;
        }
        if (!s.rec) {
            ++d.excluded;
            continue;
        }
        if (period && kept % period == period - 1)
            d.test.push_back(std::move(*s.rec));
        else
            d.train.push_back(std::move(*s.rec));
        ++kept;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Net

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Relu: return "relu";
    }
    return "?";
}

std::string to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "momentum"; }

Optimizer parse_optimizer(const std::string& s) {
    if (s == "momentum" || s == "sgd") return Optimizer::Momentum;
    if (s == "adam") return Optimizer::Adam;
    throw UsageError("unknown optimizer '" + s + "' (expected momentum or adam)");
}

Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "relu") return Activation::Relu;
    throw UsageError("unknown activation '" + s + "' (expected tanh, sigmoid or relu)");
}

std::size_t SurrogateNet::parameter_count() const {
    return std::size_t(hidden) * inputs + 2 * std::size_t(hidden) + 1;
}

std::vector<double> SurrogateNet::parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (int r = 0; r < hidden; ++r)
        for (int c = 0; c < inputs; ++c) p.push_back(w1(r, c));
    for (int r = 0; r < hidden; ++r) p.push_back(b1[r]);
    for (int r = 0; r < hidden; ++r) p.push_back(w2[r]);
    p.push_back(b2);
    return p;
}

void SurrogateNet::set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw DomainError("parameter vector has the wrong length");
    std::size_t k = 0;
    for (int r = 0; r < hidden; ++r)
        for (int c = 0; c < inputs; ++c) w1(r, c) = p[k++];
    for (int r = 0; r < hidden; ++r) b1[r] = p[k++];
    for (int r = 0; r < hidden; ++r) w2[r] = p[k++];
    b2 = p[k];
}

void SurrogateNet::validate() const {
    if (inputs < 1 || hidden < 1) throw DomainError("surrogate net needs positive layer sizes");
    if (w1.rows() != hidden || w1.cols() != inputs || b1.size() != hidden || w2.size() != hidden ||
        feature_mean.size() != inputs || feature_scale.size() != inputs)
        throw DomainError("surrogate net shapes are inconsistent");
    for (double v : parameters())
        if (!std::isfinite(v)) throw DomainError("surrogate net has non-finite parameters");
    if (!(target_scale > 0) || !std::isfinite(target_scale)) throw DomainError("surrogate target scale must be positive");
    for (int i = 0; i < inputs; ++i)
        if (!(feature_scale[i] > 0)) throw DomainError("surrogate feature scale must be positive");
}

double SurrogateNet::predict(std::span<const double> features) const {
    if (features.size() != std::size_t(inputs)) throw DomainError("feature length does not match the net");
    double y = b2;
    for (int r = 0; r < hidden; ++r) {
        double z = b1[r];
        for (int c = 0; c < inputs; ++c) z += w1(r, c) * ((features[c] - feature_mean[c]) / feature_scale[c]);
        y += w2[r] * act(activation, z);
    }
    return target_scale * y;
}

SurrogateNet make_net(int inputs, int hidden, Activation a, std::uint64_t seed) {
    if (inputs < 1 || hidden < 1) throw DomainError("surrogate net needs positive layer sizes");
    SurrogateNet net;
    net.inputs = inputs;
    net.hidden = hidden;
    net.activation = a;
    net.w1.resize(hidden, inputs);
    net.b1 = Eigen::VectorXd::Zero(hidden);
    net.w2.resize(hidden);
    net.feature_mean = Eigen::VectorXd::Zero(inputs);
    net.feature_scale = Eigen::VectorXd::Ones(inputs);
    auto rng = stream_rng(seed, 0x4d4c50ull, 0);
    const double l1 = std::sqrt(6.0 / double(inputs + hidden));
    const double l2 = std::sqrt(6.0 / double(hidden + 1));
    for (int r = 0; r < hidden; ++r)
        for (int c = 0; c < inputs; ++c) net.w1(r, c) = (2.0 * uniform01(rng) - 1.0) * l1;
    for (int r = 0; r < hidden; ++r) net.w2[r] = (2.0 * uniform01(rng) - 1.0) * l2;
    return net;
}

double loss_and_gradient(const SurrogateNet& net, std::span<const TrainRecord> batch, std::vector<double>* grad) {
    const Batch b = make_batch(net, batch);
    return batch_loss(net, b.x, b.t, grad);
}

double mse(const SurrogateNet& net, std::span<const TrainRecord> records) {
    if (records.empty()) return 0.0;
    const Batch b = make_batch(net, records);
    return batch_loss(net, b.x, b.t, nullptr);
}

TrainResult train(const Dataset& data, const Hyper& hp) {
    if (data.train.empty()) throw DomainError("training set is empty");
    if (hp.epochs < 1 || hp.batch_size < 1 || !(hp.learning_rate > 0) || hp.momentum < 0 || hp.momentum >= 1)
        throw DomainError("invalid training hyper-parameters");
    const int inputs = static_cast<int>(data.train.front().features.size());
    SurrogateNet net = make_net(inputs, hp.hidden, hp.activation, hp.seed);

    // Normalization from the training set.
    const std::size_t n = data.train.size();
    for (int i = 0; i < inputs; ++i) {
        double s = 0, s2 = 0;
        for (const auto& r : data.train) s += r.features[i];
        const double mean = s / double(n);
        for (const auto& r : data.train) s2 += (r.features[i] - mean) * (r.features[i] - mean);
        const double sd = std::sqrt(s2 / double(n));
        net.feature_mean[i] = mean;
        net.feature_scale[i] = sd > 1e-12 ? sd : 1.0;
    }
    double t2 = 0;
    for (const auto& r : data.train) t2 += r.target * r.target;
    const double rms = std::sqrt(t2 / double(n));
    net.target_scale = rms > 1e-12 ? rms : 1.0;

    const Batch all = make_batch(net, data.train);
    auto rng = stream_rng(hp.seed, 0x5452414eull, 0);
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> theta = net.parameters(), velocity(theta.size(), 0.0), second(theta.size(), 0.0), grad;
    long adam_t = 0;
    double lr = hp.learning_rate;
    double best = batch_loss(net, all.x, all.t, nullptr);
    if (!std::isfinite(best)) throw ConvergenceError("surrogate loss is not finite at initialization", best, 0);
    TrainResult res;
    int bad_streak = 0;
    Eigen::MatrixXd bx;
    Eigen::RowVectorXd bt;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        const std::vector<double> saved = theta;
        for (std::size_t k = n - 1; k > 0; --k) std::swap(order[k], order[rng() % (k + 1)]);
        for (std::size_t lo = 0; lo < n; lo += hp.batch_size) {
            const std::size_t hi = std::min(n, lo + std::size_t(hp.batch_size));
            const auto cnt = static_cast<Eigen::Index>(hi - lo);
            bx.resize(inputs, cnt);
            bt.resize(cnt);
            for (Eigen::Index c = 0; c < cnt; ++c) {
                bx.col(c) = all.x.col(order[lo + c]);
                bt[c] = all.t[order[lo + c]];
            }
            batch_loss(net, bx, bt, &grad);
            if (hp.optimizer == Optimizer::Adam) {
                ++adam_t;
                const double c1 = 1.0 - std::pow(0.9, double(adam_t));
                const double c2 = 1.0 - std::pow(0.999, double(adam_t));
                for (std::size_t p = 0; p < theta.size(); ++p) {
                    velocity[p] = 0.9 * velocity[p] + 0.1 * grad[p];
                    second[p] = 0.999 * second[p] + 0.001 * grad[p] * grad[p];
                    theta[p] -= lr * (velocity[p] / c1) / (std::sqrt(second[p] / c2) + 1e-8);
                }
            } else {
                for (std::size_t p = 0; p < theta.size(); ++p) {
                    velocity[p] = hp.momentum * velocity[p] - lr * grad[p];
                    theta[p] += velocity[p];
                }
            }
            net.set_parameters(theta);
        }
        const double loss = batch_loss(net, all.x, all.t, nullptr);
        if (std::isfinite(loss) && loss <= best) {
            best = loss;
            lr *= 1.05;
            bad_streak = 0;
        } else {
            if (!std::isfinite(loss) && ++bad_streak > 20)
                throw ConvergenceError("surrogate training diverged (NaN loss) at epoch " + std::to_string(epoch) +
                                           ", step " + std::to_string(lr),
                                       loss, epoch);
            theta = saved;
            net.set_parameters(theta);
            std::fill(velocity.begin(), velocity.end(), 0.0);
            std::fill(second.begin(), second.end(), 0.0);
            adam_t = 0;
            lr *= 0.5;
        }
        res.epoch_loss.push_back(best);
    }
    res.train_mse = best;
    res.test_mse = mse(net, data.test);
    res.net = std::move(net);
    return res;
}

Prediction predict(const SurrogateNet& net, std::span<const double> features, double i_ideal) {
    Prediction p;
    if (i_ideal == 0.0) return p;
    p.signed_dev = net.predict(features);
    p.nf = std::abs(p.signed_dev);
    p.i_nonideal = i_ideal * (1.0 - p.signed_dev);
    return p;
}

// ---------------------------------------------------------------------------
// Files

void save(const SurrogateNet& net, const std::filesystem::path& manifest) {
    net.validate();
    auto blob_path = manifest;
    blob_path.replace_extension(".bin");
    const auto params = net.parameters();
    blob::write<double>(blob_path, params);
    json j;
    j["format"] = "xbar-surrogate";
    j["version"] = 1;
    j["inputs"] = net.inputs;
    j["hidden"] = net.hidden;
    j["activation"] = to_string(net.activation);
    j["target_scale"] = net.target_scale;
    j["feature_mean"] = std::vector<double>(net.feature_mean.data(), net.feature_mean.data() + net.inputs);
    j["feature_scale"] = std::vector<double>(net.feature_scale.data(), net.feature_scale.data() + net.inputs);
    j["tech"] = net.tech;
    j["rows"] = net.rows;
    j["blob"] = blob_path.filename().string();
    j["blob_dtype"] = "float64-le";
    j["blob_count"] = params.size();
    j["layout"] = {"w1[hidden][inputs]", "b1[hidden]", "w2[hidden]", "b2"};
    std::ofstream os(manifest);
    if (!os) throw UsageError("cannot write " + manifest.string());
    os << j.dump(2) << '\n';
}

SurrogateNet load(const std::filesystem::path& manifest) {
    std::ifstream is(manifest);
    if (!is) throw UsageError("cannot read " + manifest.string());
    json j;
    try {
        j = json::parse(is);
        if (j.at("format") != "xbar-surrogate" || j.at("version") != 1)
            throw UsageError(manifest.string() + ": not an xbar-surrogate v1 manifest");
        SurrogateNet net = make_net(j.at("inputs").get<int>(), j.at("hidden").get<int>(),
                                    parse_activation(j.at("activation").get<std::string>()), 0);
        net.target_scale = j.at("target_scale").get<double>();
        const auto mean = j.at("feature_mean").get<std::vector<double>>();
        const auto scale = j.at("feature_scale").get<std::vector<double>>();
        if (mean.size() != std::size_t(net.inputs) || scale.size() != std::size_t(net.inputs))
            throw UsageError(manifest.string() + ": normalization vectors have the wrong length");
        for (int i = 0; i < net.inputs; ++i) {
            net.feature_mean[i] = mean[i];
            net.feature_scale[i] = scale[i];
        }
        net.tech = j.value("tech", "");
        net.rows = j.value("rows", 0);
        const auto params = blob::read<double>(manifest.parent_path() / j.at("blob").get<std::string>());
        if (params.size() != net.parameter_count() || j.at("blob_count").get<std::size_t>() != params.size())
            throw UsageError(manifest.string() + ": parameter blob has the wrong size");
        net.set_parameters(params);
        net.validate();
        return net;
    } catch (const json::exception& e) {
        throw UsageError(manifest.string() + ": " + e.what());
    } catch (const DomainError& e) {
        throw UsageError(manifest.string() + ": " + e.what());
    }
}

}  // namespace xbar::surrogate
