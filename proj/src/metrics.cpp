#include "xbar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>

#include "xbar/parallel.hpp"

namespace xbar::metrics {

using topology::BitMatrix;
using topology::BitVector;
using topology::CrossbarConfig;
using topology::RowGroup;

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Per-state curves, built once per model.
struct CurveTable {
    devices::CellCurve c[2][2];

    explicit CurveTable(const devices::BitCellModel& model) {
        for (int in : {0, 1})
            for (int w : {0, 1}) c[in][w] = model.curve(in, w);
    }
};

// Solves the columns of one workload; owns reusable ladder buffers.
class ColumnEvaluator {
  public:
    ColumnEvaluator(const CrossbarConfig& cfg, const devices::BitCellModel& model,
                    const CurveTable& curves, const solver::SolverOptions& opts)
        : cfg_(cfg), model_(model), curves_(curves), opts_(opts) {
        if (solver::LadderColumn::supported(cfg))
            ladder_ = std::make_unique<solver::LadderColumn>(solver::LadderColumn::for_config(cfg));
    }

    // Current into the sink of every column.
    std::vector<double> all_columns(const BitMatrix& w, const BitVector& in,
                                    std::span<const double> scale) {
        if (ladder_) {
            std::vector<double> out(cfg_.cols);
            for (int j = 0; j < cfg_.cols; ++j) out[j] = gate_column(w, j, in, scale);
            return out;
        }
        const auto net = topology::build(cfg_, model_, w, in, scale);
        return solver::solve_dc(net, opts_).column_currents;
    }

    // Current of a single column. Gate-input columns are independent, so only
    // column j is built; drain-input needs the whole array.
    double column(const BitMatrix& w, int j, const BitVector& in) {
        if (ladder_) return gate_column(w, j, in, {});
        if (cfg_.topology == Topology::GateInput) {
            CrossbarConfig one = cfg_;
            one.cols = 1;
            BitMatrix wj(cfg_.rows, 1);
            for (int i = 0; i < cfg_.rows; ++i) wj(i, 0) = w(i, j);
            const auto net = topology::build(one, model_, wj, in);
            return solver::solve_dc(net, opts_).column_currents[0];
        }
        const auto net = topology::build(cfg_, model_, w, in);
        return solver::solve_dc(net, opts_).column_currents[j];
    }

  private:
    double gate_column(const BitMatrix& w, int j, const BitVector& in, std::span<const double> scale) {
        cells_.resize(cfg_.rows);
        for (int i = 0; i < cfg_.rows; ++i) {
            const int a = in[i] ? 1 : 0, b = w(i, j) ? 1 : 0;
            cells_[i].curve = curves_.c[a][b];
            cells_[i].scale = scale.empty() ? 1.0 : scale[std::size_t(i) * cfg_.cols + j];
        }
        return ladder_->solve(cells_, opts_).current;
    }

    const CrossbarConfig& cfg_;
    const devices::BitCellModel& model_;
    const CurveTable& curves_;
    solver::SolverOptions opts_;
    std::unique_ptr<solver::LadderColumn> ladder_;
    std::vector<devices::CellElement> cells_;
};

}  // namespace

// ---------------------------------------------------------------------------
// NF

std::optional<NFSample> nonideality_factor(double i_ideal, double i_nonideal) {
    if (i_ideal == 0.0) return std::nullopt;
    NFSample s;
    s.i_ideal = i_ideal;
    s.i_nonideal = i_nonideal;
    s.signed_dev = (i_ideal - i_nonideal) / i_ideal;
    s.nf = std::abs(s.signed_dev);
    return s;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DomainError("quantile of an empty set");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level outside [0, 1]");
    const double h = p * double(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

NFDistribution summarize(std::vector<double> values, std::size_t excluded, std::size_t failed) {
    NFDistribution d;
    d.excluded_zero_ideal = excluded;
    d.failed = failed;
    d.count = values.size();
    if (values.empty()) return d;
    std::sort(values.begin(), values.end());
    d.min = values.front();
    d.max = values.back();
    d.q1 = quantile_sorted(values, 0.25);
    d.median = quantile_sorted(values, 0.5);
    d.q3 = quantile_sorted(values, 0.75);
    double sum = 0.0;
    for (double v : values) sum += v;
    d.mean = sum / double(values.size());
    return d;
}

void WorkloadSampler::validate() const {
    auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!ok(p_input) || !ok(p_weight)) throw DomainError("sampler probabilities must lie in [0, 1]");
}

void WorkloadSampler::draw(std::mt19937_64& rng, BitMatrix& weights, BitVector& inputs) const {
    double pi = p_input, pw = p_weight;
    if (kind == Kind::MixedDensity) {
        pi = 0.05 + 0.9 * uniform01(rng);
        pw = 0.05 + 0.9 * uniform01(rng);
    }
    for (auto& b : inputs) b = uniform01(rng) < pi ? 1 : 0;
    for (auto& b : weights.bits) b = uniform01(rng) < pw ? 1 : 0;
}

std::string to_string(WorkloadSampler::Kind kind) {
    return kind == WorkloadSampler::Kind::Bernoulli ? "bernoulli" : "mixed";
}

WorkloadSampler::Kind parse_sampler_kind(const std::string& s) {
    const auto k = lower(s);
    if (k == "bernoulli") return WorkloadSampler::Kind::Bernoulli;
    if (k == "mixed" || k == "mixed-density") return WorkloadSampler::Kind::MixedDensity;
    throw UsageError("unknown sampler '" + s + "' (expected bernoulli or mixed)");
}

std::uint64_t column_digest(const BitVector& inputs, const BitMatrix& weights, int column) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint8_t b) {
        h ^= b;
        h *= 1099511628211ull;
    };
    for (int i = 0; i < weights.rows; ++i) {
        mix(inputs[i] ? 1 : 0);
        mix(weights(i, column) ? 1 : 0);
    }
    return h;
}

std::vector<std::vector<double>> solve_groups(const CrossbarConfig& cfg,
                                              const devices::BitCellModel& model,
                                              const BitMatrix& weights, const BitVector& inputs,
                                              std::span<const double> cell_scale,
                                              const solver::SolverOptions& opts) {
    const CurveTable curves(model);
    ColumnEvaluator eval(cfg, model, curves, opts);
    std::vector<std::vector<double>> out;
    for (const RowGroup& g : cfg.row_groups())
        out.push_back(eval.all_columns(weights, topology::mask_inputs(inputs, g), cell_scale));
    return out;
}

std::string to_string(NFReference r) { return r == NFReference::Binary ? "binary" : "device"; }

NFReference parse_nf_reference(const std::string& s) {
    if (s == "binary") return NFReference::Binary;
    if (s == "device") return NFReference::Device;
    throw UsageError("unknown NF reference '" + s + "' (expected binary or device)");
}

NFRun nf_distribution(const CrossbarConfig& cfg, const devices::BitCellModel& model,
                      const WorkloadSampler& sampler, const NFOptions& opts) {
    cfg.validate();
    sampler.validate();
    opts.solver.validate();
    if (opts.samples < 1) throw DomainError("nf_distribution needs at least one sample");
    if (!opts.cell_scale.empty() && opts.cell_scale.size() != std::size_t(cfg.rows) * cfg.cols)
        throw DomainError("cell_scale size does not match the array");
    if (!model.calibrated()) throw StateError("bit-cell model is not calibrated");
    if (opts.variation) {
        opts.variation->validate();
        if (!opts.cell_scale.empty()) throw DomainError("give either cell_scale or a variation config, not both");
    }

    const CurveTable curves(model);
    const auto groups = cfg.row_groups();
    const int workers = resolve_workers(opts.workers);

    struct Slot {
        std::vector<NFSample> samples;
        std::size_t excluded = 0;
        bool failed = false;
    };
    std::vector<Slot> slots(opts.samples);
    std::vector<std::unique_ptr<ColumnEvaluator>> evals(workers);

    parallel_for(opts.samples, workers, [&](std::size_t s, int w) {
        if (!evals[w]) evals[w] = std::make_unique<ColumnEvaluator>(cfg, model, curves, opts.solver);
        auto rng = stream_rng(opts.seed, 0x4e46, s);
        BitMatrix weights(cfg.rows, cfg.cols);
        BitVector inputs(cfg.rows);
        sampler.draw(rng, weights, inputs);
        Slot& slot = slots[s];
        const std::vector<double> scale =
            opts.variation ? dse::variation_scales(model, cfg.v_bl, weights, *opts.variation, 0) : opts.cell_scale;
        try {
            for (std::size_t g = 0; g < groups.size(); ++g) {
                const auto masked = topology::mask_inputs(inputs, groups[g]);
                const auto ideal =
                    opts.reference == NFReference::Device
                        ? solver::device_ideal_output(cfg, model, weights, masked)
                        : solver::ideal_output(masked, weights, cfg.v_bl, devices::on_conductance(model));
                const auto real = evals[w]->all_columns(weights, masked, scale);
                for (int j = 0; j < cfg.cols; ++j) {
                    auto nf = nonideality_factor(ideal[j], real[j]);
                    if (!nf) {
                        ++slot.excluded;
                        continue;
                    }
                    nf->sample = s;
                    nf->group = static_cast<int>(g);
                    nf->column = j;
                    nf->digest = column_digest(masked, weights, j);
                    slot.samples.push_back(*nf);
                }
            }
        } catch (const ConvergenceError&) {
            slot.samples.clear();
            slot.excluded = 0;
            slot.failed = true;
        }
    });

    NFRun run;
    std::vector<double> pooled;
    std::vector<std::vector<double>> per_col(cfg.cols);
    std::vector<std::size_t> per_col_excluded(cfg.cols, 0);
    std::size_t excluded = 0, failed = 0;
    for (const Slot& slot : slots) {
        excluded += slot.excluded;
        failed += slot.failed ? 1 : 0;
        for (const NFSample& x : slot.samples) {
            pooled.push_back(x.nf);
            per_col[x.column].push_back(x.nf);
            if (opts.keep_samples) run.samples.push_back(x);
        }
    }
    // Per-column exclusion counts are not tracked separately; the pooled
    // count carries the total.
    run.pooled = summarize(std::move(pooled), excluded, failed);
    for (int j = 0; j < cfg.cols; ++j) run.per_column.push_back(summarize(std::move(per_col[j]), 0, failed));
    return run;
}

// ---------------------------------------------------------------------------
// Sense margin

std::string to_string(SMMode mode) {
    switch (mode) {
        case SMMode::Exhaustive: return "exhaustive";
        case SMMode::Structured: return "structured";
        case SMMode::Random: return "random";
    }
    return "?";
}

SMMode parse_sm_mode(const std::string& s) {
    const auto k = lower(s);
    if (k == "exhaustive") return SMMode::Exhaustive;
    if (k == "structured") return SMMode::Structured;
    if (k == "random") return SMMode::Random;
    throw UsageError("unknown sense-margin mode '" + s + "' (expected exhaustive, structured or random)");
}

namespace {

// One candidate pattern for the target column.
struct Pattern {
    BitVector inputs;
    BitMatrix weights;
    int x = 0;
};

// Zero-product states an active row can take.
constexpr int kFillers[3][2] = {{1, 0}, {0, 0}, {0, 1}};

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
    return r;
}

void all_subsets(int k, int x, std::vector<std::vector<int>>& out) {
    std::vector<int> idx(x);
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
        out.push_back(idx);
        int p = x - 1;
        while (p >= 0 && idx[p] == k - x + p) --p;
        if (p < 0) return;
        ++idx[p];
        for (int q = p + 1; q < x; ++q) idx[q] = idx[q - 1] + 1;
    }
}

// Positions (indices into the active-row list) of the x product cells.
std::vector<std::vector<int>> placements(int k, int x, std::size_t budget) {
    std::vector<std::vector<int>> out;
    if (x == 0) {
        out.emplace_back();
        return out;
    }
    if (binomial(k, x) <= double(budget)) {
        all_subsets(k, x, out);
        return out;
    }
    std::vector<int> top(x), bottom(x), centre(x), spread(x), ends(x);
    for (int t = 0; t < x; ++t) {
        top[t] = t;                    // farthest from the sink
        bottom[t] = k - x + t;         // nearest to the sink
        centre[t] = (k - x) / 2 + t;
        spread[t] = static_cast<int>((std::int64_t(t) * (k - 1)) / std::max(1, x - 1));
    }
    // Split between both ends.
    for (int t = 0; t < x; ++t) ends[t] = t < (x + 1) / 2 ? t : k - (x - t);
    for (auto* v : {&top, &bottom, &centre, &spread, &ends}) {
        std::sort(v->begin(), v->end());
        if (std::adjacent_find(v->begin(), v->end()) != v->end()) continue;
        if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
    }
    return out;
}

struct Extrema {
    std::vector<double> lo, hi;
    std::size_t examined = 0;

    explicit Extrema(int x_max)
        : lo(x_max + 1, std::numeric_limits<double>::infinity()),
          hi(x_max + 1, -std::numeric_limits<double>::infinity()) {}

    void add(int x, double i) {
        lo[x] = std::min(lo[x], i);
        hi[x] = std::max(hi[x], i);
        ++examined;
    }
    void merge(const Extrema& o) {
        for (std::size_t x = 0; x < lo.size(); ++x) {
            lo[x] = std::min(lo[x], o.lo[x]);
            hi[x] = std::max(hi[x], o.hi[x]);
        }
        examined += o.examined;
    }
};

class PatternSpace {
  public:
    PatternSpace(const CrossbarConfig& cfg, int column) : cfg_(cfg), j_(column) {}

    // Structured candidates for output x in group g.
    std::vector<Pattern> structured(const RowGroup& g, int x, std::size_t budget) const {
        std::vector<int> active;
        for (int i = g.begin; i < g.end; ++i) active.push_back(i);
        const int k = static_cast<int>(active.size());
        const bool drain = cfg_.topology == Topology::DrainInput;
        const bool has_inactive = k < cfg_.rows;
        std::vector<Pattern> out;
        for (const auto& place : placements(k, x, budget)) {
            std::vector<std::uint8_t> on(k, 0);
            for (int p : place) on[p] = 1;
            for (const auto& fill : kFillers) {
                if (x == k && &fill != &kFillers[0]) break;  // no zero-product rows left
                for (int inactive_w = 0; inactive_w < (has_inactive ? 2 : 1); ++inactive_w)
                    for (int others = 0; others < (drain && cfg_.cols > 1 ? 3 : 1); ++others) {
                        Pattern pat;
                        pat.x = x;
                        pat.inputs.assign(cfg_.rows, 0);
                        pat.weights = BitMatrix(cfg_.rows, cfg_.cols);
                        for (int i = 0; i < cfg_.rows; ++i) pat.weights(i, j_) = std::uint8_t(inactive_w);
                        for (int t = 0; t < k; ++t) {
                            const int i = active[t];
                            pat.inputs[i] = on[t] ? 1 : std::uint8_t(fill[0]);
                            pat.weights(i, j_) = on[t] ? 1 : std::uint8_t(fill[1]);
                        }
                        fill_others(pat, others);
                        out.push_back(std::move(pat));
                    }
            }
        }
        return out;
    }

    // Uniformly random pattern with exactly x products in group g.
    Pattern random(const RowGroup& g, int x, std::mt19937_64& rng) const {
        const int k = g.end - g.begin;
        std::vector<int> order(k);
        std::iota(order.begin(), order.end(), 0);
        for (int t = k - 1; t > 0; --t) std::swap(order[t], order[rng() % std::uint64_t(t + 1)]);
        Pattern pat;
        pat.x = x;
        pat.inputs.assign(cfg_.rows, 0);
        pat.weights = BitMatrix(cfg_.rows, cfg_.cols);
        for (auto& b : pat.weights.bits) b = rng() & 1;
        for (int t = 0; t < k; ++t) {
            const int i = g.begin + order[t];
            if (t < x) {
                pat.inputs[i] = 1;
                pat.weights(i, j_) = 1;
            } else {
                const auto& f = kFillers[rng() % 3];
                pat.inputs[i] = std::uint8_t(f[0]);
                pat.weights(i, j_) = std::uint8_t(f[1]);
            }
        }
        return pat;
    }

    // Number of free bits for exhaustive enumeration in group g.
    int free_bits(const RowGroup& g) const {
        const int k = g.end - g.begin;
        const int n = cfg_.rows;
        return k + n + (cfg_.topology == Topology::DrainInput ? n * (cfg_.cols - 1) : 0);
    }

    Pattern decode(const RowGroup& g, std::uint64_t code) const {
        Pattern pat;
        pat.inputs.assign(cfg_.rows, 0);
        pat.weights = BitMatrix(cfg_.rows, cfg_.cols);
        for (int i = g.begin; i < g.end; ++i, code >>= 1) pat.inputs[i] = code & 1;
        for (int i = 0; i < cfg_.rows; ++i, code >>= 1) pat.weights(i, j_) = code & 1;
        if (cfg_.topology == Topology::DrainInput)
            for (int i = 0; i < cfg_.rows; ++i)
                for (int j = 0; j < cfg_.cols; ++j) {
                    if (j == j_) continue;
                    pat.weights(i, j) = code & 1;
                    code >>= 1;
                }
        for (int i = g.begin; i < g.end; ++i) pat.x += (pat.inputs[i] && pat.weights(i, j_)) ? 1 : 0;
        return pat;
    }

  private:
    void fill_others(Pattern& pat, int mode) const {
        for (int j = 0; j < cfg_.cols; ++j) {
            if (j == j_) continue;
            for (int i = 0; i < cfg_.rows; ++i)
                pat.weights(i, j) = mode == 0 ? 0 : mode == 1 ? 1 : pat.weights(i, j_);
        }
    }

    const CrossbarConfig& cfg_;
    int j_;
};

}  // namespace

SMCurve sense_margin_curve(const CrossbarConfig& cfg, const devices::BitCellModel& model, int x_max,
                           const SMOptions& opts) {
    cfg.validate();
    opts.solver.validate();
    if (!model.calibrated()) throw StateError("bit-cell model is not calibrated");
    const int active = cfg.active_rows();
    if (x_max <= 0 || x_max > active) x_max = active;
    const int column = opts.column < 0 ? cfg.cols - 1 : opts.column;
    if (column >= cfg.cols) throw DomainError("sense-margin column outside the array");

    const CurveTable curves(model);
    const PatternSpace space(cfg, column);
    const auto groups = cfg.row_groups();
    const int workers = resolve_workers(opts.workers);
    std::vector<std::unique_ptr<ColumnEvaluator>> evals(workers);
    auto evaluator = [&](int w) -> ColumnEvaluator& {
        if (!evals[w]) evals[w] = std::make_unique<ColumnEvaluator>(cfg, model, curves, opts.solver);
        return *evals[w];
    };

    Extrema total(x_max);

    if (opts.mode == SMMode::Exhaustive) {
        std::size_t patterns = 0;
        for (const auto& g : groups) {
            const int bits = space.free_bits(g);
            if (bits >= 63 || (std::size_t(1) << bits) > opts.exhaustive_budget - std::min(patterns, opts.exhaustive_budget))
                throw DomainError("exhaustive sense-margin search exceeds the pattern budget (" +
                                  std::to_string(opts.exhaustive_budget) + ")");
            patterns += std::size_t(1) << bits;
        }
        for (const auto& g : groups) {
            const std::size_t count = std::size_t(1) << space.free_bits(g);
            const std::size_t chunk = 256;
            const std::size_t tasks = (count + chunk - 1) / chunk;
            std::vector<Extrema> part(tasks, Extrema(x_max));
            parallel_for(tasks, workers, [&](std::size_t t, int w) {
                for (std::size_t c = t * chunk; c < std::min(count, (t + 1) * chunk); ++c) {
                    const Pattern p = space.decode(g, c);
                    if (p.x > x_max) continue;
                    part[t].add(p.x, evaluator(w).column(p.weights, column, p.inputs));
                }
            });
            for (const auto& e : part) total.merge(e);
        }
    } else {
        struct Task {
            int group;
            int x;
        };
        std::vector<Task> tasks;
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (int x = 0; x <= x_max; ++x) tasks.push_back({static_cast<int>(g), x});
        std::vector<Extrema> part(tasks.size(), Extrema(x_max));
        parallel_for(tasks.size(), workers, [&](std::size_t t, int w) {
            const auto& g = groups[tasks[t].group];
            const int x = tasks[t].x;
            for (const Pattern& p : space.structured(g, x, opts.placement_budget))
                part[t].add(x, evaluator(w).column(p.weights, column, p.inputs));
            if (opts.mode == SMMode::Random) {
                auto rng = stream_rng(opts.seed, 0x534d + std::uint64_t(tasks[t].group), std::uint64_t(x));
                for (std::size_t r = 0; r < opts.random_samples; ++r) {
                    const Pattern p = space.random(g, x, rng);
                    part[t].add(x, evaluator(w).column(p.weights, column, p.inputs));
                }
            }
        });
        for (const auto& e : part) total.merge(e);
    }

    SMCurve curve;
    curve.mode = opts.mode;
    curve.examined = total.examined;
    for (int x = 1; x <= x_max; ++x) {
        SMPoint p;
        p.x = x;
        p.i_x_min = total.lo[x];
        p.i_xm1_max = total.hi[x - 1];
        p.sm = sense_margin(p.i_x_min, p.i_xm1_max);
        curve.points.push_back(p);
    }
    return curve;
}

int o_max(const SMCurve& curve, double threshold) {
    if (curve.points.empty()) throw DomainError("o_max of an empty sense-margin curve");
    int best = 0;
    for (const auto& p : curve.points) {
        if (!(p.sm > threshold)) break;
        best = p.x;
    }
    return best;
}

AnalyticSM analytic_sm_estimate(int n_active, double v, double r_on, double r_hrs) {
    if (n_active <= 0 || !(v > 0.0) || !(r_on > 0.0) || !(r_hrs > 0.0))
        throw DomainError("analytic_sm_estimate needs positive arguments");
    return {n_active * v / r_hrs, v / r_on};
}

// ---------------------------------------------------------------------------
// CSV

void write_nf_samples_csv(std::ostream& os, std::span<const NFSample> samples) {
    os << "sample,group,column,i_ideal,i_nonideal,signed_dev,nf,digest\n";
    for (const auto& s : samples) {
        char digest[24];
        std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(s.digest));
        os << s.sample << ',' << s.group << ',' << s.column << ',' << fmt(s.i_ideal) << ','
           << fmt(s.i_nonideal) << ',' << fmt(s.signed_dev) << ',' << fmt(s.nf) << ',' << digest << '\n';
    }
}

void write_nf_summary_csv(std::ostream& os, const NFRun& run) {
    os << "scope,count,excluded_zero_ideal,failed,min,q1,median,q3,max,mean\n";
    auto row = [&](const std::string& scope, const NFDistribution& d) {
        os << scope << ',' << d.count << ',' << d.excluded_zero_ideal << ',' << d.failed << ','
           << fmt(d.min) << ',' << fmt(d.q1) << ',' << fmt(d.median) << ',' << fmt(d.q3) << ','
           << fmt(d.max) << ',' << fmt(d.mean) << '\n';
    };
    row("pooled", run.pooled);
    for (std::size_t j = 0; j < run.per_column.size(); ++j) row("col" + std::to_string(j), run.per_column[j]);
}

void write_sm_curve_csv(std::ostream& os, const SMCurve& curve) {
    os << "x,i_x_min,i_xm1_max,sm_x\n";
    for (const auto& p : curve.points)
        os << p.x << ',' << fmt(p.i_x_min) << ',' << fmt(p.i_xm1_max) << ',' << fmt(p.sm) << '\n';
}

SMCurve read_sm_curve_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "x,i_x_min,i_xm1_max,sm_x")
        throw DomainError("sense-margin CSV: unexpected header");
    SMCurve curve;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f[4];
        for (auto& s : f)
            if (!std::getline(ls, s, ',')) throw DomainError("sense-margin CSV: short row '" + line + "'");
        SMPoint p;
        p.x = std::stoi(f[0]);
        p.i_x_min = std::stod(f[1]);
        p.i_xm1_max = std::stod(f[2]);
        p.sm = std::stod(f[3]);
        curve.points.push_back(p);
    }
    return curve;
}

}  // namespace xbar::metrics
