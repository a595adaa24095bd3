// xbar-dse: command-line front end.
//
//   xbar-dse <subcommand> [--config FILE] [--set key=value ...] [--seed N]
//            [--out DIR] [--workers N] [--force] [subcommand flags]
//
// Exit codes: 0 success, 1 usage or domain error, 2 numerical failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "xbar/config.hpp"
#include "xbar/dse.hpp"
#include "xbar/inference.hpp"
#include "xbar/metrics.hpp"
#include "xbar/solver.hpp"
#include "xbar/surrogate.hpp"
#include "xbar/topology.hpp"

namespace fs = std::filesystem;
using xbar::config::Json;

namespace {

// A subcommand flag that writes one config key.
struct Binding {
    enum class Kind { Text, Number, Flag, NumberList, TextList };
    std::string key;
    Kind kind;
    std::string value;
    bool flag = false;
    CLI::Option* opt = nullptr;
};

struct Command {
    std::string name;
    CLI::App* app = nullptr;
    std::deque<Binding> bindings;
    std::string config_file;
    std::vector<std::string> overrides;
    std::string out;
    bool force = false;

    void bind(const std::string& flag, const std::string& key, Binding::Kind kind, const std::string& help) {
        Binding& b = bindings.emplace_back();
        b.key = key;
        b.kind = kind;
        if (kind == Binding::Kind::Flag)
            b.opt = app->add_flag(flag, b.flag, help);
        else
            b.opt = app->add_option(flag, b.value, help);
        if (kind == Binding::Kind::Number) b.opt->type_name("NUM");
        if (kind == Binding::Kind::NumberList) b.opt->type_name("NUM,...");
        if (kind == Binding::Kind::TextList) b.opt->type_name("NAME,...");
    }
};

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream in(s);
    while (std::getline(in, cur, ','))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

Json binding_value(const Binding& b) {
    switch (b.kind) {
        case Binding::Kind::Text:
            return b.value;
        case Binding::Kind::Flag:
            return b.flag;
        case Binding::Kind::Number: {
            Json v = Json::parse(b.value, nullptr, false);
            if (v.is_discarded() || !v.is_number())
                throw xbar::UsageError(b.opt->get_name() + ": '" + b.value + "' is not a number");
            return v;
        }
        case Binding::Kind::NumberList: {
            Json arr = Json::array();
            for (const auto& part : split(b.value)) {
                Json v = Json::parse(part, nullptr, false);
                if (v.is_discarded() || !v.is_number())
                    throw xbar::UsageError(b.opt->get_name() + ": '" + part + "' is not a number");
                arr.push_back(v);
            }
            return arr;
        }
        case Binding::Kind::TextList: {
            Json arr = Json::array();
            for (const auto& part : split(b.value)) arr.push_back(part);
            return arr;
        }
    }
    return nullptr;
}

int effective_workers(const Json& cfg) {
    if (const char* env = std::getenv("XBAR_DSE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw xbar::UsageError("XBAR_DSE_THREADS must be a positive integer");
        return static_cast<int>(v);
    }
    const int w = cfg["workers"].get<int>();
    if (w < 0) throw xbar::UsageError("workers must be >= 0");
    if (w > 0) return w;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t require_seed(const Json& cfg, const std::string& why) {
    const auto s = xbar::config::seed(cfg);
    if (!s) throw xbar::UsageError(why + " is stochastic: give --seed N or set \"seed\" in the config");
    return *s;
}

// Output files of one run; nothing is overwritten without --force.
class Outputs {
  public:
    Outputs(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}

    void plan(const std::vector<std::string>& names) {
        for (const auto& n : names) {
            const fs::path p = dir_ / n;
            if (fs::exists(p) && !force_)
                throw xbar::UsageError(p.string() + " exists (use --force to overwrite)");
        }
        fs::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& body) {
        const fs::path p = dir_ / name;
        std::ofstream f(p, std::ios::binary);
        if (!f) throw xbar::UsageError("cannot write " + p.string());
        f << body;
        if (!f) throw xbar::UsageError("cannot write " + p.string());
        names_.push_back(name);
    }

    template <class F>
    void emit(const std::string& name, F&& fill) {
        std::ostringstream os;
        fill(os);
        write(name, os.str());
    }

    void record(const std::string& name) { names_.push_back(name); }
    const fs::path& dir() const { return dir_; }
    const std::vector<std::string>& names() const { return names_; }

  private:
    fs::path dir_;
    bool force_;
    std::vector<std::string> names_;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

fs::path model_path(const Json& cfg) {
    const auto s = cfg["inference"]["model"].get<std::string>();
    return s.empty() ? fs::path(XBAR_DATA_DIR) / "desk" / "model.json" : fs::path(s);
}

fs::path dataset_path(const Json& cfg) {
    const auto s = cfg["inference"]["dataset"].get<std::string>();
    return s.empty() ? fs::path(XBAR_DATA_DIR) / "desk" / "test.json" : fs::path(s);
}

void print_nf(const std::string& label, const xbar::metrics::NFDistribution& d) {
    std::printf("%s NF median %.6g (q1 %.6g, q3 %.6g, max %.6g) over %zu columns\n", label.c_str(), d.median, d.q1,
                d.q3, d.max, d.count);
}

// ---------------------------------------------------------------------------

void run_solve(const Json& cfg, Outputs& out) {
    using namespace xbar;
    const auto a = config::array_config(cfg);
    const auto model = topology::make_model(a);
    const auto inputs = config::parse_bits(cfg["solve"]["inputs"].get<std::string>(), a.rows, "inputs");
    const auto flat = config::parse_bits(cfg["solve"]["weights"].get<std::string>(), a.rows * a.cols, "weights");
    topology::BitMatrix weights(a.rows, a.cols);
    weights.bits = flat;
    const bool voltages = cfg["solve"]["voltages"].get<bool>();
    const bool netlist = cfg["solve"]["netlist"].get<bool>();
    const auto groups = a.row_groups();

    std::vector<std::string> files{"currents.csv", "manifest.json"};
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const std::string tag = groups.size() == 1 ? "" : "_g" + std::to_string(g);
        if (voltages) files.push_back("voltages" + tag + ".csv");
        if (netlist) files.push_back("netlist" + tag + ".txt");
    }
    out.plan(files);

    const auto opts = config::solver_options(cfg);
    const auto nets = topology::build_activation_groups(a, model, weights, inputs);
    std::ostringstream csv;
    csv << "group,column,current_a,ideal_a,device_ideal_a,nf\n";
    for (std::size_t g = 0; g < nets.size(); ++g) {
        const std::string tag = nets.size() == 1 ? "" : "_g" + std::to_string(g);
        const auto r = solver::solve_dc(nets[g], opts);
        const auto masked = topology::mask_inputs(inputs, groups[g]);
        const auto ideal = solver::ideal_output(masked, weights, a.v_bl, devices::on_conductance(model));
        const auto dev = solver::device_ideal_output(a, model, weights, masked);
        const auto& ref = metrics::parse_nf_reference(cfg["workload"]["reference"].get<std::string>()) ==
                                  metrics::NFReference::Binary
                              ? ideal
                              : dev;
        for (int j = 0; j < a.cols; ++j) {
            const double i = r.column_currents[j];
            const auto nf = metrics::nonideality_factor(ref[j], i);
            csv << g << ',' << j << ',' << fmt(i) << ',' << fmt(ideal[j]) << ',' << fmt(dev[j]) << ','
                << (nf ? fmt(nf->nf) : std::string("nan")) << '\n';
            if (a.cols <= 16)
                std::printf("group %zu column %d: %.6g uA (ideal %.6g uA)\n", g, j, i * 1e6, ref[j] * 1e6);
        }
        if (a.cols > 16)
            std::printf("group %zu: %d columns solved in %d Newton iterations\n", g, a.cols, r.newton_iterations);
        if (voltages) out.emit("voltages" + tag + ".csv", [&](std::ostream& os) { solver::write_voltages_csv(os, nets[g], r); });
        if (netlist) out.emit("netlist" + tag + ".txt", [&](std::ostream& os) { topology::write_netlist(os, nets[g]); });
    }
    out.write("currents.csv", csv.str());
}

void run_nf(const Json& cfg, Outputs& out, int workers) {
    using namespace xbar;
    require_seed(cfg, "nf");
    const auto a = config::array_config(cfg);
    const auto opts = config::nf_options(cfg, workers);
    const auto sampler = config::workload_sampler(cfg);
    std::vector<std::string> files{"nf_summary.csv", "manifest.json"};
    if (opts.keep_samples) files.push_back("nf_samples.csv");
    out.plan(files);
    const auto model = topology::make_model(a);
    const auto run = metrics::nf_distribution(a, model, sampler, opts);
    out.emit("nf_summary.csv", [&](std::ostream& os) { metrics::write_nf_summary_csv(os, run); });
    if (opts.keep_samples)
        out.emit("nf_samples.csv", [&](std::ostream& os) { metrics::write_nf_samples_csv(os, run.samples); });
    print_nf(std::string(to_string(a.tech)), run.pooled);
}

void run_sm(const Json& cfg, Outputs& out, int workers) {
    using namespace xbar;
    const auto a = config::array_config(cfg);
    auto opts = config::sm_options(cfg, workers);
    if (opts.mode == metrics::SMMode::Random) opts.seed = require_seed(cfg, "sm in random mode");
    out.plan({"sm_curve.csv", "manifest.json"});
    const auto model = topology::make_model(a);
    const auto curve = metrics::sense_margin_curve(a, model, cfg["sm"]["x_max"].get<int>(), opts);
    const double threshold = cfg["sm"]["threshold"].get<double>();
    out.emit("sm_curve.csv", [&](std::ostream& os) { metrics::write_sm_curve_csv(os, curve); });
    for (std::size_t k = 0; k < curve.points.size() && k < 8; ++k)
        std::printf("SM_%d = %.6g uA\n", curve.points[k].x, curve.points[k].sm * 1e6);
    std::printf("O_MAX = %d at %.3g A\n", metrics::o_max(curve, threshold), threshold);
}

void run_sweep(const Json& cfg, Outputs& out, int workers) {
    using namespace xbar;
    dse::SweepSpec base;
    base.seed = require_seed(cfg, "sweep");
    base.knob = dse::parse_knob(cfg["sweep"]["knob"].get<std::string>());
    base.values = config::number_list(cfg, "sweep.values");
    base.base = config::array_config(cfg);
    base.want_nf = cfg["sweep"]["nf"].get<bool>();
    base.want_sm = cfg["sweep"]["sm"].get<bool>();
    base.samples = config::nf_options(cfg, workers).samples;
    base.sampler = config::workload_sampler(cfg);
    base.sm = config::sm_options(cfg, workers);
    base.sm.seed = base.seed;
    base.sm_x_max = cfg["sm"]["x_max"].get<int>();
    base.threshold = cfg["sm"]["threshold"].get<double>();
    base.workers = workers;

    std::vector<dse::SweepSpec> specs;
    const auto acts = config::number_list(cfg, "sweep.activations");
    if (acts.empty()) {
        base.label = std::string(to_string(base.base.tech));
        specs.push_back(base);
    }
    for (double g : acts) {
        dse::SweepSpec s = base;
        s.base.activation.group_size = static_cast<int>(g);
        if (s.base.activation.group_size != g || g < 0) throw UsageError("sweep.activations must be group sizes >= 0");
        s.label = g == 0 ? "fwa" : "pwa" + std::to_string(static_cast<int>(g));
        specs.push_back(s);
    }
    for (auto& s : specs) s.validate();

    std::vector<std::string> files{"sweep_points.csv", "manifest.json"};
    if (base.want_nf) files.insert(files.end(), {"sweep_nf.csv", "sweep_nf.dat"});
    if (base.want_sm) files.insert(files.end(), {"sweep_sm.csv", "sweep_sm.dat"});
    out.plan(files);

    std::vector<dse::SweepResult> results;
    for (const auto& s : specs) results.push_back(dse::sweep(s));

    out.emit("sweep_points.csv", [&](std::ostream& os) { dse::write_sweep_points_csv(os, results); });
    if (base.want_nf) {
        out.emit("sweep_nf.csv", [&](std::ostream& os) { dse::write_sweep_nf_csv(os, results); });
        out.emit("sweep_nf.dat", [&](std::ostream& os) { dse::write_gnuplot_box(os, results); });
    }
    if (base.want_sm) {
        out.emit("sweep_sm.csv", [&](std::ostream& os) { dse::write_sweep_sm_csv(os, results); });
        out.emit("sweep_sm.dat", [&](std::ostream& os) { dse::write_gnuplot_sm(os, results); });
    }
    for (const auto& r : results)
        for (const auto& p : r.points) {
            std::printf("%s %s=%g", r.label.c_str(), dse::to_string(r.knob).c_str(), p.value);
            if (p.nf) std::printf("  NF median %.6g", p.nf->median);
            if (p.o_max) std::printf("  O_MAX %d", *p.o_max);
            std::printf("\n");
        }
}

void run_variations(const Json& cfg, Outputs& out, int workers) {
    using namespace xbar;
    const std::uint64_t seed = require_seed(cfg, "variations");
    const auto a = config::array_config(cfg);
    const auto sampler = config::workload_sampler(cfg);
    const double sigma = cfg["variation"]["sigma_frac"].get<double>();
    const int seeds = cfg["variation"]["seeds"].get<int>();
    const bool infer = cfg["variation"]["inference"].get<bool>();
    if (seeds < 1) throw UsageError("variation.seeds must be >= 1");
    out.plan({"variations.csv", "manifest.json"});

    const auto model = topology::make_model(a);
    std::optional<inference::DeskModel> net;
    std::optional<inference::DeskDataset> data;
    inference::InferenceConfig ic;
    if (infer) {
        net = inference::load_model(model_path(cfg));
        data = inference::load_dataset(dataset_path(cfg));
        ic.tile = a;
        ic.mode = inference::Mode::Solver;
        ic.input_bits = cfg["inference"]["input_bits"].get<int>();
        ic.weight_bits = cfg["inference"]["weight_bits"].get<int>();
        ic.max_samples = cfg["inference"]["max_samples"].get<std::size_t>();
        ic.nf_probe_samples = 0;
        ic.workers = workers;
        ic.solver = config::solver_options(cfg);
    }

    std::ostringstream csv;
    csv << "run,sigma_frac,variation_seed,count,excluded_zero_ideal,failed,min,q1,median,q3,max,mean";
    if (infer) csv << ",accuracy";
    csv << '\n';
    auto row = [&](const std::string& run, double s, const std::string& vseed, const std::optional<dse::VariationConfig>& vc) {
        auto opts = config::nf_options(cfg, workers);
        opts.seed = seed;
        opts.variation = vc;
        const auto d = metrics::nf_distribution(a, model, sampler, opts).pooled;
        csv << run << ',' << fmt(s) << ',' << vseed << ',' << d.count << ',' << d.excluded_zero_ideal << ',' << d.failed
            << ',' << fmt(d.min) << ',' << fmt(d.q1) << ',' << fmt(d.median) << ',' << fmt(d.q3) << ',' << fmt(d.max)
            << ',' << fmt(d.mean);
        std::printf("%-8s NF median %.6g", run.c_str(), d.median);
        if (infer) {
            ic.variation = vc;
            const auto r = inference::run_inference(*net, *data, ic, model);
            csv << ',' << fmt(r.accuracy);
            std::printf("  accuracy %.4f", r.accuracy);
        }
        csv << '\n';
        std::printf("\n");
    };
    row("nominal", 0.0, "", std::nullopt);
    for (int k = 0; k < seeds; ++k) {
        const dse::VariationConfig vc{sigma, seed + static_cast<std::uint64_t>(k)};
        row(std::to_string(k), sigma, std::to_string(vc.seed), vc);
    }
    out.write("variations.csv", csv.str());
}

void run_train(const Json& cfg, Outputs& out, int workers) {
    using namespace xbar;
    require_seed(cfg, "train-surrogate");
    const auto a = config::array_config(cfg);
    const auto sampler = [&] {
        auto w = config::workload_sampler(cfg);
        w.kind = metrics::parse_sampler_kind(cfg["surrogate"]["sampler"].get<std::string>());
        w.validate();
        return w;
    }();
    const auto dopts = config::dataset_options(cfg, workers);
    const auto hy = config::hyper(cfg);
    out.plan({"surrogate.json", "surrogate.bin", "training.csv", "manifest.json"});

    const auto model = topology::make_model(a);
    const auto data = surrogate::generate_dataset(a, model, sampler, dopts);
    const auto r = surrogate::train(data, hy);
    surrogate::save(r.net, out.dir() / "surrogate.json");
    out.record("surrogate.json");
    out.record("surrogate.bin");
    out.emit("training.csv", [&](std::ostream& os) {
        os << "epoch,train_mse\n";
        for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) os << e + 1 << ',' << fmt(r.epoch_loss[e]) << '\n';
        os << "final_train," << fmt(r.train_mse) << '\n';
        os << "final_test," << fmt(r.test_mse) << '\n';
    });
    std::printf("records %zu (train %zu, test %zu, excluded %zu, failed %zu)\n", data.size(), data.train.size(),
                data.test.size(), data.excluded, data.failed);
    std::printf("train MSE %.6g, test MSE %.6g\n", r.train_mse, r.test_mse);
}

void run_infer(const Json& cfg, Outputs& out, int workers) {
    using namespace xbar;
    const auto a = config::array_config(cfg);
    inference::InferenceConfig ic;
    ic.tile = a;
    ic.mode = inference::parse_mode(cfg["inference"]["mode"].get<std::string>());
    ic.input_bits = cfg["inference"]["input_bits"].get<int>();
    ic.weight_bits = cfg["inference"]["weight_bits"].get<int>();
    ic.max_samples = cfg["inference"]["max_samples"].get<std::size_t>();
    ic.nf_probe_samples = cfg["inference"]["nf_probe_samples"].get<std::size_t>();
    ic.workers = workers;
    ic.solver = config::solver_options(cfg);
    const double sigma = cfg["inference"]["sigma_frac"].get<double>();
    if (sigma > 0) ic.variation = dse::VariationConfig{sigma, require_seed(cfg, "infer with variations")};

    std::optional<surrogate::SurrogateNet> net;
    if (ic.mode == inference::Mode::Surrogate) {
        const auto p = cfg["inference"]["surrogate"].get<std::string>();
        if (p.empty()) throw UsageError("surrogate mode needs inference.surrogate (path to surrogate.json)");
        if (!fs::exists(p)) throw UsageError("surrogate file " + p + " does not exist");
        net = surrogate::load(p);
    }
    const auto mp = model_path(cfg);
    const auto dp = dataset_path(cfg);
    if (!fs::exists(mp)) throw UsageError("model file " + mp.string() + " does not exist");
    if (!fs::exists(dp)) throw UsageError("dataset file " + dp.string() + " does not exist");
    out.plan({"inference.json", "manifest.json"});

    const auto desk = inference::load_model(mp);
    const auto data = inference::load_dataset(dp);
    const auto model = topology::make_model(a);
    const auto r = inference::run_inference(desk, data, ic, model, net ? &*net : nullptr);
    out.emit("inference.json", [&](std::ostream& os) { inference::write_result_json(os, r); });
    std::printf("accuracy %.4f (%zu/%zu) in %s mode\n", r.accuracy, r.correct, r.total,
                inference::to_string(ic.mode).c_str());
}

void run_compare(const Json& cfg, Outputs& out, int workers) {
    using namespace xbar;
    dse::CompareOptions o;
    o.seed = require_seed(cfg, "compare");
    o.techs.clear();
    for (const auto& t : cfg["compare"]["techs"]) {
        if (!t.is_string()) throw UsageError("compare.techs must hold technology names");
        o.techs.push_back(parse_technology(t.get<std::string>()));
    }
    o.base = config::array_config(cfg);
    o.samples = config::nf_options(cfg, workers).samples;
    o.sampler = config::workload_sampler(cfg);
    o.threshold = cfg["sm"]["threshold"].get<double>();
    o.inference = cfg["compare"]["inference"].get<bool>();
    o.model = model_path(cfg);
    o.dataset = dataset_path(cfg);
    o.inference_samples = cfg["compare"]["inference_samples"].get<std::size_t>();
    o.sigma_frac = cfg["compare"]["sigma_frac"].get<double>();
    o.variation_seeds = cfg["compare"]["variation_seeds"].get<int>();
    o.workers = workers;
    out.plan({"compare.json", "manifest.json"});

    const auto rep = dse::compare_technologies(o);
    out.emit("compare.json", [&](std::ostream& os) { dse::write_comparison_json(os, rep); });
    for (const auto& t : rep.techs) {
        std::printf("%-9s NF median %.6g  O_MAX %d", std::string(to_string(t.tech)).c_str(), t.nf.median, t.o_max);
        if (t.has_inference)
            std::printf("  accuracy drop %.4f (variations %.4f)", t.nominal_drop(), t.variation_drop());
        std::printf("  [%s]\n", t.settings.c_str());
    }
}

Json manifest(const std::string& sub, const Json& cfg, int workers, const Outputs& out, double wall) {
    Json m;
    m["format"] = "xbar-manifest";
    m["version"] = 1;
    m["tool"] = "xbar-dse";
    m["subcommand"] = sub;
    m["versions"] = {{"xbar-dse", std::string(xbar::kVersion)},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"cli11", CLI11_VERSION},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    m["seed"] = cfg["seed"];
    m["workers"] = workers;
    m["config"] = cfg;
    m["outputs"] = out.names();
    m["wall_time_s"] = wall;
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crossbar non-ideality and design-space exploration"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(xbar::kVersion));

    using K = Binding::Kind;
    std::deque<Command> commands;
    auto add = [&](const std::string& name, const std::string& help) -> Command& {
        Command& c = commands.emplace_back();
        c.name = name;
        c.app = app.add_subcommand(name, help);
        c.app->add_option("--config", c.config_file, "JSON config or run manifest (comments allowed)")->type_name("FILE");
        c.app->add_option("--set", c.overrides, "override one key: section.key=value")->allow_extra_args(false)->type_name("KEY=VALUE");
        c.app->add_option("--out", c.out, "output directory (default xbar-out/<subcommand>)")->type_name("DIR");
        c.app->add_flag("--force", c.force, "overwrite existing outputs");
        c.bind("--seed", "seed", K::Number, "RNG seed");
        c.bind("--workers", "workers", K::Number, "worker threads (0: available parallelism)");
        c.bind("--tech", "array.tech", K::Text, "sram | reram | fefet | sot-mram");
        c.bind("--rows", "array.rows", K::Number, "array rows");
        c.bind("--cols", "array.cols", K::Number, "array columns");
        c.bind("--topology", "array.topology", K::Text, "gate | drain");
        c.bind("--fidelity", "array.fidelity", K::Text, "level0 | level1");
        c.bind("--activation", "array.activation", K::Number, "PWA group size (0: all rows)");
        c.bind("--r-on", "device.r_on", K::Number, "R_ON knob in ohms");
        return c;
    };

    Command& solve = add("solve", "DC solve of one array and input pattern");
    solve.bind("--input", "solve.inputs", K::Text, "input bits, one per row, or one bit for all rows");
    solve.bind("--weight", "solve.weights", K::Text, "weight bits row-major, or one bit for all cells");
    solve.bind("--voltages", "solve.voltages", K::Flag, "write node voltages");
    solve.bind("--netlist", "solve.netlist", K::Flag, "write the netlist");

    Command& nf = add("nf", "Monte Carlo nonideality-factor distribution");
    nf.bind("--samples", "workload.samples", K::Number, "random workloads");
    nf.bind("--reference", "workload.reference", K::Text, "device | binary");
    nf.bind("--keep-samples", "workload.keep_samples", K::Flag, "write every column sample");

    Command& sm = add("sm", "sense-margin curve and O_MAX");
    sm.bind("--mode", "sm.mode", K::Text, "structured | exhaustive | random");
    sm.bind("--x-max", "sm.x_max", K::Number, "largest output value (0: all active rows)");

    Command& sweep = add("sweep", "NF and SM over one design knob");
    sweep.bind("--knob", "sweep.knob", K::Text, "r_on | t_fe | t_mgo | v_bias | gap | activation | topology");
    sweep.bind("--values", "sweep.values", K::NumberList, "comma-separated knob values");
    sweep.bind("--activations", "sweep.activations", K::NumberList, "one series per PWA group size (0: FWA)");
    sweep.bind("--samples", "workload.samples", K::Number, "random workloads per point");

    Command& var = add("variations", "NF (and accuracy) under device-to-device spread");
    var.bind("--sigma", "variation.sigma_frac", K::Number, "relative spread s");
    var.bind("--seeds", "variation.seeds", K::Number, "arrays drawn");
    var.bind("--inference", "variation.inference", K::Flag, "also run the bundled model");
    var.bind("--samples", "workload.samples", K::Number, "random workloads per array");

    Command& train = add("train-surrogate", "generate solver data and fit the surrogate MLP");
    train.bind("--records", "surrogate.records", K::Number, "column records");
    train.bind("--epochs", "surrogate.epochs", K::Number, "training epochs");
    train.bind("--optimizer", "surrogate.optimizer", K::Text, "momentum | adam");

    Command& infer = add("infer", "quantized inference of the bundled model on crossbar tiles");
    infer.bind("--mode", "inference.mode", K::Text, "ideal | solver | surrogate");
    infer.bind("--surrogate", "inference.surrogate", K::Text, "surrogate.json for surrogate mode");
    infer.bind("--model", "inference.model", K::Text, "model manifest");
    infer.bind("--dataset", "inference.dataset", K::Text, "dataset manifest");
    infer.bind("--max-samples", "inference.max_samples", K::Number, "samples evaluated (0: all)");
    infer.bind("--sigma", "inference.sigma_frac", K::Number, "device spread s (0: nominal)");

    Command& cmp = add("compare", "cross-technology report at the optimized settings");
    cmp.bind("--techs", "compare.techs", K::TextList, "comma-separated technologies");
    cmp.bind("--inference-samples", "compare.inference_samples", K::Number, "samples per accuracy run");
    cmp.bind("--samples", "workload.samples", K::Number, "random workloads for NF");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    Command* cmd = nullptr;
    for (auto& c : commands)
        if (c.app->parsed()) cmd = &c;

    try {
        const auto t0 = std::chrono::steady_clock::now();
        Json cfg = xbar::config::load_config(cmd->config_file, cmd->overrides);
        for (const auto& b : cmd->bindings)
            if (b.opt->count() > 0) xbar::config::set_value(cfg, b.key, binding_value(b));
        const int workers = effective_workers(cfg);
        Outputs out(cmd->out.empty() ? fs::path("xbar-out") / cmd->name : fs::path(cmd->out), cmd->force);

        if (cmd->name == "solve") run_solve(cfg, out);
        else if (cmd->name == "nf") run_nf(cfg, out, workers);
        else if (cmd->name == "sm") run_sm(cfg, out, workers);
        else if (cmd->name == "sweep") run_sweep(cfg, out, workers);
        else if (cmd->name == "variations") run_variations(cfg, out, workers);
        else if (cmd->name == "train-surrogate") run_train(cfg, out, workers);
        else if (cmd->name == "infer") run_infer(cfg, out, workers);
        else if (cmd->name == "compare") run_compare(cfg, out, workers);

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.write("manifest.json", manifest(cmd->name, cfg, workers, out, wall).dump(2) + "\n");
        return 0;
    } catch (const xbar::UsageError& e) {
        std::fprintf(stderr, "xbar-dse %s: %s\n", cmd->name.c_str(), e.what());
        return 1;
    } catch (const xbar::DomainError& e) {
        std::fprintf(stderr, "xbar-dse %s: %s\n", cmd->name.c_str(), e.what());
        return 1;
    } catch (const Json::exception& e) {
        std::fprintf(stderr, "xbar-dse %s: malformed input: %s\n", cmd->name.c_str(), e.what());
        return 1;
    } catch (const xbar::ConvergenceError& e) {
        std::fprintf(stderr, "xbar-dse %s: no convergence after %d iterations (residual %.3g): %s\n",
                     cmd->name.c_str(), e.iterations, e.last_residual, e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "xbar-dse %s: %s\n", cmd->name.c_str(), e.what());
        return 2;
    }
}
