// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run criteria 1-12
//   acceptance 5 9 12     run a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dense_mna.hpp"
#include "xbar/devices.hpp"
#include "xbar/dse.hpp"
#include "xbar/inference.hpp"
#include "xbar/metrics.hpp"
#include "xbar/solver.hpp"
#include "xbar/surrogate.hpp"
#include "xbar/topology.hpp"

namespace fs = std::filesystem;
using namespace xbar;
using topology::CrossbarConfig;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double rel(double a, double b) {
    if (a == b) return 0.0;
    return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

int workers() {
    if (const char* env = std::getenv("XBAR_DSE_THREADS")) return std::max(1, std::atoi(env));
    return std::max(1u, std::thread::hardware_concurrency());
}

const char* name(TechnologyKind t) {
    switch (t) {
        case TechnologyKind::SRAM: return "sram";
        case TechnologyKind::ReRAM: return "reram";
        case TechnologyKind::FeFET: return "fefet";
        case TechnologyKind::SOTMRAM: return "sot";
    }
    return "?";
}

CrossbarConfig array(TechnologyKind tech, Topology topo, int n) {
    CrossbarConfig c;
    c.tech = tech;
    c.topology = topo;
    c.rows = n;
    c.cols = n;
    return c;
}

// ---------------------------------------------------------------------------

Outcome formula_fidelity() {
    devices::ReRAMParams p;
    p.gap_nm = 0.34;
    const double i = devices::reram_current(p, 0.25);
    const double hand = 0.2e-3 * std::exp(-0.34 / 0.15) * std::sinh(0.25 / 0.35);
    p.gap_nm = 0.53;
    const double r = devices::reram_small_signal_resistance(p);
    const bool ok = rel(i, hand) <= 1e-3 && rel(i, 1.610e-5) <= 1e-3 && std::abs(r - 60e3) <= 0.02 * 60e3;
    return {ok, fmt("I(0.34 nm, 0.25 V) = %.6g A (hand %.6g, rel %.2g); R(0.53 nm) = %.1f ohm (%.2f%% off 60k)", i,
                    hand, rel(i, hand), r, 100.0 * (r - 60e3) / 60e3)};
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    int nets = 0;
    for (auto tech : kAllTechnologies)
        for (auto topo : {Topology::GateInput, Topology::DrainInput})
            for (int n = 1; n <= 4; ++n)
                for (int m = 1; m <= 4; ++m) {
                    CrossbarConfig cfg = array(tech, topo, n);
                    cfg.cols = m;
                    const auto model = topology::make_model(cfg);
                    for (int trial = 0; trial < 6; ++trial) {
                        topology::BitMatrix w(n, m);
                        topology::BitVector in(n);
                        for (auto& b : w.bits) b = trial == 0 ? 1 : rng() & 1;
                        for (auto& b : in) b = trial == 0 ? 1 : rng() & 1;
                        in[0] = 1;
                        const auto net = topology::build(cfg, model, w, in);
                        const auto s = solver::solve_dc(net);
                        const auto d = oracle::dense_mna(net);
                        for (int j = 0; j < m; ++j) worst = std::max(worst, rel(s.column_currents[j], d.column_currents[j]));
                        ++nets;
                    }
                }

    double worst_nl = 0.0;
    for (double gap : {0.34, 0.53, 0.9})
        for (double vs : {0.1, 0.25, 0.6}) {
            topology::NetlistGraph net;
            const int a = net.add_node({'A', 0, 0});
            net.drivers.push_back(net.add_source(a, vs, 500.0));
            const double is = 0.2e-3 * std::exp(-gap / 0.15);
            net.sink_elements.push_back(
                net.add_cell(a, topology::kGround, {devices::ReramSeriesCurve{is, 0.35, 0.0}, 1.0}, {}));
            net.sense_nodes.push_back(a);
            const auto s = solver::solve_dc(net);
            double lo = 0.0, hi = vs / 500.0;
            for (int k = 0; k < 300; ++k) {
                const double mid = 0.5 * (lo + hi);
                if (vs - mid * 500.0 > 0.35 * std::asinh(mid / is))
                    lo = mid;
                else
                    hi = mid;
            }
            worst_nl = std::max(worst_nl, rel(s.column_currents[0], 0.5 * (lo + hi)));
        }
    return {worst <= 1e-9 && worst_nl <= 1e-10,
            fmt("%d linear nets, max rel %.2g (tol 1e-9); ReRAM vs bisection max rel %.2g (tol 1e-10)", nets, worst,
                worst_nl)};
}

Outcome ideal_limit() {
    double worst_nf = 0.0, worst_i = 0.0;
    std::size_t columns = 0;
    std::mt19937_64 rng(5);
    for (auto tech : kAllTechnologies)
        for (auto topo : {Topology::GateInput, Topology::DrainInput}) {
            CrossbarConfig cfg = array(tech, topo, topo == Topology::GateInput ? 64 : 16);
            cfg.parasitics = topology::ParasiticsConfig::zero();
            const auto model = topology::make_model(cfg);
            metrics::NFOptions o;
            o.samples = 500;
            o.seed = 11;
            o.workers = workers();
            const auto run = metrics::nf_distribution(cfg, model, metrics::WorkloadSampler::bernoulli(0.5), o);
            worst_nf = std::max(worst_nf, run.pooled.max);
            columns += run.pooled.count;
            for (int trial = 0; trial < 20; ++trial) {
                topology::BitMatrix w(cfg.rows, cfg.cols);
                topology::BitVector in(cfg.rows);
                for (auto& b : w.bits) b = rng() & 1;
                for (auto& b : in) b = rng() & 1;
                const auto s = solver::solve_dc(topology::build(cfg, model, w, in));
                // Sum over cells of V * G_ij with each cell's own conductance.
                const auto eq1 = solver::device_ideal_output(cfg, model, w, in);
                for (int j = 0; j < cfg.cols; ++j) worst_i = std::max(worst_i, rel(s.column_currents[j], eq1[j]));
            }
        }
    return {worst_nf <= 1e-9 && worst_i <= 1e-12,
            fmt("max NF %.2g over %zu columns (tol 1e-9); max rel deviation from sum V*G_ij %.2g (tol 1e-12)", worst_nf,
                columns, worst_i)};
}

Outcome calibration() {
    int ok = 0;
    double worst = 0.0;
    std::string worst_at;
    for (auto tech : kAllTechnologies) {
        const auto m = devices::BitCellModel::calibrate(tech, Fidelity::Level1Physical);
        const auto ref = devices::reference_corners(tech);
        for (int in : {0, 1})
            for (int w : {0, 1}) {
                const double e = rel(m.operating_point_resistance(in, w), ref.at(in, w));
                ok += e <= 0.05;
                if (e > worst) {
                    worst = e;
                    worst_at = fmt("%s (%d,%d)", name(tech), in, w);
                }
            }
    }
    return {ok == 16, fmt("%d/16 corners within 5%%; worst %.2f%% at %s", ok, 100 * worst, worst_at.c_str())};
}

Outcome gate_vs_drain() {
    bool ok = true;
    std::string detail;
    for (auto tech : kAllTechnologies) {
        double nf[2];
        metrics::SMCurve sm[2];
        for (int t = 0; t < 2; ++t) {
            const auto cfg = array(tech, t == 0 ? Topology::GateInput : Topology::DrainInput, 16);
            const auto model = topology::make_model(cfg);
            metrics::NFOptions o;
            o.samples = 500;
            o.seed = 17;
            o.workers = workers();
            nf[t] = metrics::nf_distribution(cfg, model, metrics::WorkloadSampler::bernoulli(0.5), o).pooled.median;
            metrics::SMOptions so;
            so.workers = workers();
            sm[t] = metrics::sense_margin_curve(cfg, model, 4, so);
        }
        bool tech_ok = nf[0] < nf[1];
        for (int x = 0; x < 4; ++x) tech_ok = tech_ok && sm[0].points[x].sm >= sm[1].points[x].sm;
        ok = ok && tech_ok;
        detail += fmt("%s NF %.4f<%.4f SM4 %.3g>=%.3g uA%s; ", name(tech), nf[0], nf[1], sm[0].points[3].sm * 1e6,
                      sm[1].points[3].sm * 1e6, tech_ok ? "" : " (violated)");
    }
    return {ok, detail};
}

dse::SweepSpec sweep_spec(std::uint64_t seed) {
    dse::SweepSpec s;
    s.samples = 500;
    s.seed = seed;
    s.workers = workers();
    s.sm.workers = workers();
    s.threshold = 1e-6;
    return s;
}

Outcome ron_sweep() {
    const std::vector<double> values{10e3, 20e3, 60e3, 250e3};
    bool ok = true;
    std::string detail;
    int sram_omax = -1;
    for (auto tech : {TechnologyKind::SRAM, TechnologyKind::ReRAM, TechnologyKind::FeFET}) {
        const auto r = dse::sweep_ron(tech, values, sweep_spec(21));
        detail += std::string(name(tech)) + " NF";
        for (std::size_t k = 0; k < r.points.size(); ++k) {
            detail += fmt(" %.4f", r.points[k].nf->median);
            if (k > 0) ok = ok && r.points[k].nf->median < r.points[k - 1].nf->median;
        }
        detail += "; ";
        if (tech == TechnologyKind::SRAM) sram_omax = *r.points.back().o_max;
    }
    ok = ok && sram_omax == 0;
    return {ok, detail + fmt("SRAM O_MAX(250k) = %d", sram_omax)};
}

Outcome tfe_sweep() {
    const auto r = dse::sweep_tfe({5.0, 6.0, 7.0}, sweep_spec(23));
    const auto& p = r.points;
    const bool ok = p[0].nf->median > p[2].nf->median && *p[1].o_max >= *p[0].o_max;
    return {ok, fmt("median NF 5/6/7 nm = %.4f/%.4f/%.4f; O_MAX 5/6/7 nm = %d/%d/%d", p[0].nf->median,
                    p[1].nf->median, p[2].nf->median, *p[0].o_max, *p[1].o_max, *p[2].o_max)};
}

Outcome tmgo_sweep() {
    const auto series = dse::sweep_tmgo({1.1, 1.2, 1.3}, {topology::Activation::full(), topology::Activation::partial_rows(8)},
                                        sweep_spec(29));
    bool decreasing = true;
    std::string detail;
    for (const auto& s : series) {
        detail += s.label + " NF";
        for (std::size_t k = 0; k < s.points.size(); ++k) {
            detail += fmt(" %.4f", s.points[k].nf->median);
            if (k > 0) decreasing = decreasing && s.points[k].nf->median < s.points[k - 1].nf->median;
        }
        detail += "; ";
    }
    const auto& fwa = series[0].points.back();
    const auto& pwa = series[1].points.back();
    const double sm1_fwa = fwa.sm->points[0].sm, sm1_pwa = pwa.sm->points[0].sm;
    const bool sm_ok = sm1_pwa > sm1_fwa;
    const bool omax_ok = *fwa.o_max == 1;
    detail += fmt("SM_1 at 1.3 nm: PWA(8) %.3g uA vs FWA %.3g uA; O_MAX(FWA, 1.3 nm) = %d (want 1)", sm1_pwa * 1e6,
                  sm1_fwa * 1e6, *fwa.o_max);
    return {decreasing && sm_ok && omax_ok, detail};
}

Outcome tech_ordering() {
    dse::CompareOptions o;
    o.samples = 500;
    o.seed = 31;
    o.inference = false;
    o.workers = workers();
    const auto rep = dse::compare_technologies(o);
    std::string detail;
    double lo = 1e300, hi = -1e300;
    TechnologyKind lo_t{}, hi_t{};
    for (const auto& t : rep.techs) {
        detail += fmt("%s %.4f [%s]; ", name(t.tech), t.nf.median, t.settings.c_str());
        if (t.nf.median < lo) lo = t.nf.median, lo_t = t.tech;
        if (t.nf.median > hi) hi = t.nf.median, hi_t = t.tech;
    }
    const bool ok = lo_t == TechnologyKind::FeFET && hi_t == TechnologyKind::SOTMRAM;
    return {ok, detail + fmt("lowest %s, highest %s", name(lo_t), name(hi_t))};
}

const inference::DeskModel& desk_model() {
    static const auto m = inference::load_model(fs::path(XBAR_DATA_DIR) / "desk" / "model.json");
    return m;
}

const inference::DeskDataset& desk_data() {
    static const auto d = inference::load_dataset(fs::path(XBAR_DATA_DIR) / "desk" / "test.json");
    return d;
}

constexpr std::size_t kInferenceSamples = 100;

Outcome surrogate_check() {
    const auto cfg = dse::optimized_config(TechnologyKind::FeFET);
    const auto model = topology::make_model(cfg);
    surrogate::DatasetOptions dopt;
    dopt.records = 80000;
    dopt.seed = 41;
    dopt.workers = workers();
    const auto data = surrogate::generate_dataset(cfg, model, metrics::WorkloadSampler::mixed(), dopt);
    surrogate::Hyper h;
    h.optimizer = surrogate::Optimizer::Adam;
    h.learning_rate = 1e-3;
    h.epochs = 30;
    h.seed = 41;
    const auto trained = surrogate::train(data, h);

    // Gradient check on the trained net, every parameter.
    auto net = trained.net;
    const std::span<const surrogate::TrainRecord> batch(data.test.data(), 8);
    std::vector<double> grad;
    surrogate::loss_and_gradient(net, batch, &grad);
    const auto p = net.parameters();
    double worst_grad = 0.0;
    const double step = 1e-5;
    for (std::size_t k = 0; k < p.size(); ++k) {
        auto q = p;
        q[k] = p[k] + step;
        net.set_parameters(q);
        const double up = surrogate::loss_and_gradient(net, batch, nullptr);
        q[k] = p[k] - step;
        net.set_parameters(q);
        const double dn = surrogate::loss_and_gradient(net, batch, nullptr);
        const double fd = (up - dn) / (2 * step);
        const double err = std::abs(fd - grad[k]) / (std::max(std::abs(fd), std::abs(grad[k])) + 1e-10);
        worst_grad = std::max(worst_grad, err);
    }

    inference::InferenceConfig ic;
    ic.tile = cfg;
    ic.max_samples = kInferenceSamples;
    ic.nf_probe_samples = 0;
    ic.workers = workers();
    ic.mode = inference::Mode::Solver;
    const auto solver_run = inference::run_inference(desk_model(), desk_data(), ic, model);
    ic.mode = inference::Mode::Surrogate;
    const auto surrogate_run = inference::run_inference(desk_model(), desk_data(), ic, model, &trained.net);
    const double gap = std::abs(solver_run.accuracy - surrogate_run.accuracy);

    const bool ok = worst_grad <= 1e-4 && trained.test_mse <= 1e-3 && gap <= 0.01 + 1e-12;
    return {ok, fmt("gradient max rel err %.2g over %zu params (tol 1e-4); test MSE %.3g on %zu records (tol 1e-3); "
                    "accuracy solver %.3f vs surrogate %.3f, gap %.1f points (tol 1)",
                    worst_grad, p.size(), trained.test_mse, data.test.size(), solver_run.accuracy,
                    surrogate_run.accuracy, 100 * gap)};
}

Outcome inference_ordering() {
    const auto ideal_cfg = dse::optimized_config(TechnologyKind::FeFET);
    inference::InferenceConfig ic;
    ic.max_samples = kInferenceSamples;
    ic.nf_probe_samples = 0;
    ic.workers = workers();

    ic.tile = ideal_cfg;
    ic.mode = inference::Mode::Ideal;
    const double ideal =
        inference::run_inference(desk_model(), desk_data(), ic, topology::make_model(ideal_cfg)).accuracy;

    std::map<TechnologyKind, double> drop, var_drop;
    std::string detail = fmt("ideal %.3f; drops", ideal);
    for (auto tech : kAllTechnologies) {
        ic.tile = dse::optimized_config(tech);
        ic.mode = inference::Mode::Solver;
        ic.variation.reset();
        const auto model = topology::make_model(ic.tile);
        drop[tech] = ideal - inference::run_inference(desk_model(), desk_data(), ic, model).accuracy;
        detail += fmt(" %s %.3f", name(tech), drop[tech]);
        if (tech == TechnologyKind::FeFET || tech == TechnologyKind::SOTMRAM) {
            double sum = 0.0;
            for (int k = 0; k < 10; ++k) {
                ic.variation = dse::VariationConfig{0.1, 1000u + static_cast<std::uint64_t>(k)};
                sum += ideal - inference::run_inference(desk_model(), desk_data(), ic, model).accuracy;
            }
            var_drop[tech] = sum / 10.0;
        }
    }
    using T = TechnologyKind;
    const bool fefet_ok = drop[T::FeFET] <= drop[T::ReRAM] && drop[T::FeFET] <= drop[T::SRAM];
    const bool sot_ok = drop[T::SOTMRAM] > drop[T::SRAM] && drop[T::SOTMRAM] > drop[T::ReRAM] &&
                        drop[T::SOTMRAM] > drop[T::FeFET];
    const bool var_ok = var_drop[T::SOTMRAM] > var_drop[T::FeFET];
    detail += fmt("; s=0.1 mean drops (10 seeds) sot %.3f fefet %.3f", var_drop[T::SOTMRAM], var_drop[T::FeFET]);
    return {fefet_ok && sot_ok && var_ok, detail};
}

// ---------------------------------------------------------------------------

struct Cli {
    fs::path dir;
    int run(const std::string& args) const {
        const std::string cmd = "cd '" + dir.string() + "' && '" + XBAR_DSE_BIN + "' " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

// Empty when the two output directories agree byte for byte (manifest wall
// time aside).
std::string compare_dirs(const fs::path& a, const fs::path& b) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const auto other = b / e.path().filename();
        if (!fs::exists(other)) return "missing " + other.string();
        if (e.path().filename() == "manifest.json") {
            auto ma = nlohmann::json::parse(slurp(e.path()));
            auto mb = nlohmann::json::parse(slurp(other));
            ma.erase("wall_time_s");
            mb.erase("wall_time_s");
            if (ma != mb) return "manifest differs in " + a.filename().string();
        } else if (slurp(e.path()) != slurp(other)) {
            return e.path().filename().string() + " differs";
        }
        ++n;
    }
    if (n < 2) return "no outputs in " + a.string();
    return {};
}

Outcome determinism() {
    const Cli cli{fs::temp_directory_path() / "xbar_acceptance"};
    fs::remove_all(cli.dir);
    fs::create_directories(cli.dir);
    const std::vector<std::pair<std::string, std::string>> runs{
        {"solve", "solve --tech reram --fidelity level1 --rows 4 --cols 4 --input 1011 --weight 1 --voltages"},
        {"nf", "nf --seed 3 --tech sram --rows 32 --cols 32 --samples 50 --keep-samples"},
        {"sm", "sm --seed 3 --tech fefet --rows 16 --cols 16 --mode random"},
        {"sweep", "sweep --seed 3 --tech sot-mram --knob t_mgo --values 1.1,1.2,1.3 --activations 0,8 --samples 50"},
        {"variations", "variations --seed 3 --rows 16 --cols 16 --samples 30 --seeds 3 --inference "
                       "--set inference.max_samples=5"},
        {"train-surrogate", "train-surrogate --seed 3 --rows 16 --cols 16 --records 2000 --epochs 5"},
        {"infer", "infer --rows 16 --cols 16 --max-samples 10 --mode surrogate --surrogate "
                  "train-surrogate_a/surrogate.json"},
        {"compare", "compare --seed 7 --rows 16 --cols 16 --samples 50 --inference-samples 5 "
                    "--set compare.variation_seeds=2"},
    };
    std::string detail;
    int same = 0;
    for (const auto& [sub, args] : runs) {
        const std::string a = sub + "_a", b = sub + "_b";
        if (cli.run(args + " --out " + a) != 0) {
            detail += sub + ": first run failed; ";
            continue;
        }
        if (cli.run(sub + " --config " + a + "/manifest.json --out " + b) != 0) {
            detail += sub + ": manifest re-run failed; ";
            continue;
        }
        const auto diff = compare_dirs(cli.dir / a, cli.dir / b);
        if (!diff.empty()) {
            detail += sub + ": " + diff + "; ";
            continue;
        }
        ++same;
    }
    // Same command line twice, as a user would.
    const std::string cmp = "compare --seed 7 --rows 16 --cols 16 --samples 50 --inference-samples 5 "
                            "--set compare.variation_seeds=2 --out ";
    const bool again = cli.run(cmp + "compare_c") == 0 &&
                       slurp(cli.dir / "compare_a" / "compare.json") == slurp(cli.dir / "compare_c" / "compare.json");
    detail += fmt("%d/%zu subcommands reproduce from their manifest; compare re-run %s", same, runs.size(),
                  again ? "byte-identical" : "differs");
    return {same == static_cast<int>(runs.size()) && again, detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"formula fidelity", formula_fidelity},
        {"oracle equivalence", oracle_equivalence},
        {"ideal limit", ideal_limit},
        {"level1 calibration", calibration},
        {"gate vs drain", gate_vs_drain},
        {"R_ON sweep", ron_sweep},
        {"T_FE sweep", tfe_sweep},
        {"T_MgO and PWA", tmgo_sweep},
        {"technology ordering", tech_ordering},
        {"surrogate", surrogate_check},
        {"inference ordering", inference_ordering},
        {"determinism", determinism},
    };

    std::vector<int> selected;
    for (int k = 1; k < argc; ++k) {
        const int c = std::atoi(argv[k]);
        if (c < 1 || c > static_cast<int>(criteria.size())) {
            std::fprintf(stderr, "usage: acceptance [criterion numbers 1-%zu]\n", criteria.size());
            return 2;
        }
        selected.push_back(c);
    }
    if (selected.empty())
        for (int c = 1; c <= static_cast<int>(criteria.size()); ++c) selected.push_back(c);

    int passed = 0;
    for (int c : selected) {
        const auto& [label, fn] = criteria[c - 1];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %-20s %s  %s  [%.1f s]\n", c, label.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        passed += o.pass;
    }
    std::printf("%d/%zu criteria passed\n", passed, selected.size());
    return passed == static_cast<int>(selected.size()) ? 0 : 1;
}
