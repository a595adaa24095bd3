#include "xbar/devices.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

namespace xbar::devices {

namespace {

constexpr double kRangeSlack = 1e-12;

void check_gap(double gap_nm) {
    if (!(gap_nm >= kReramGapMinNm - kRangeSlack && gap_nm <= kReramGapMaxNm + kRangeSlack))
        throw DomainError("ReRAM gap " + std::to_string(gap_nm) + " nm outside [0.34, 1.09] nm");
}

void check_reram_params(const ReRAMParams& p) {
    if (!(p.i0_amps > 0 && p.g0_nm > 0 && p.v0_volts > 0))
        throw DomainError("ReRAM parameters I0, g0, V0 must be positive");
}

double softplus(double y) {
    return y > 0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
}

double sigmoid(double y) {
    return y >= 0 ? 1.0 / (1.0 + std::exp(-y)) : std::exp(y) / (1.0 + std::exp(y));
}

// EKV interpolation function and its derivative.
double ekv_f(double x) {
    const double s = softplus(0.5 * x);
    return s * s;
}

double ekv_df(double x) {
    return softplus(0.5 * x) * sigmoid(0.5 * x);
}

}  // namespace

// ---------------------------------------------------------------------------
// ReRAM

double reram_current(const ReRAMParams& p, double v) {
    check_reram_params(p);
    check_gap(p.gap_nm);
    if (std::abs(v) > 1.0 + kRangeSlack)
        throw DomainError("ReRAM bias outside [-1, 1] V");
    return p.i0_amps * std::exp(-p.gap_nm / p.g0_nm) * std::sinh(v / p.v0_volts);
}

double reram_conductance(const ReRAMParams& p, double v) {
    check_reram_params(p);
    check_gap(p.gap_nm);
    if (std::abs(v) > 1.0 + kRangeSlack)
        throw DomainError("ReRAM bias outside [-1, 1] V");
    return p.i0_amps * std::exp(-p.gap_nm / p.g0_nm) * std::cosh(v / p.v0_volts) / p.v0_volts;
}

double reram_small_signal_resistance(const ReRAMParams& p) {
    check_reram_params(p);
    check_gap(p.gap_nm);
    return p.v0_volts / (p.i0_amps * std::exp(-p.gap_nm / p.g0_nm));
}

double reram_gap_for_resistance(const ReRAMParams& p, double r_target) {
    check_reram_params(p);
    if (!(r_target > 0))
        throw DomainError("ReRAM target resistance must be positive");
    const double g = p.g0_nm * std::log(p.i0_amps * r_target / p.v0_volts);
    if (!(g >= kReramGapMinNm - kRangeSlack && g <= kReramGapMaxNm + kRangeSlack))
        throw DomainError("ReRAM resistance " + std::to_string(r_target) +
                          " ohm not reachable with gap in [0.34, 1.09] nm");
    return std::clamp(g, kReramGapMinNm, kReramGapMaxNm);
}

// ---------------------------------------------------------------------------
// Ferroelectric film

double FeFETParams::loop_width() const {
    return ec_mv_cm / (2.0 * std::atanh(pr_uc_cm2 / ps_uc_cm2));
}

FeFETParams fefet_params_for_thickness(double t_fe_nm) {
    FeFETParams p;
    p.t_fe_nm = t_fe_nm;
    p.ps_uc_cm2 = 30.0;
    p.pr_uc_cm2 = 27.0;
    if (std::abs(t_fe_nm - 7.0) < 1e-9) {
        p.eps_r = 22.0;
        p.ec_mv_cm = 2.4;
    } else if (std::abs(t_fe_nm - 6.0) < 1e-9) {
        p.eps_r = 23.5;
        p.ec_mv_cm = 2.525;
    } else if (std::abs(t_fe_nm - 5.0) < 1e-9) {
        p.eps_r = 25.0;
        p.ec_mv_cm = 2.65;
    } else {
        throw DomainError("FeFET thickness " + std::to_string(t_fe_nm) +
                          " nm has no parameter row (expected 5, 6 or 7 nm)");
    }
    return p;
}

PreisachLoop::PreisachLoop(const FeFETParams& p)
    : ps_(p.ps_uc_cm2), ec_(p.ec_mv_cm), width_(p.loop_width()) {
    if (!(p.pr_uc_cm2 > 0 && p.pr_uc_cm2 < p.ps_uc_cm2 && p.ec_mv_cm > 0))
        throw DomainError("ferroelectric parameters need 0 < Pr < Ps and Ec > 0");
}

void PreisachLoop::saturate(int sign) {
    const double s = sign >= 0 ? 1.0 : -1.0;
    // Far enough out that tanh is exactly +/-1 in double precision.
    field_ = s * (ec_ + 60.0 * width_);
    pol_ = s * ps_;
    turns_.clear();
    origin_ = {field_, pol_};
    origin_direction_ = static_cast<int>(s);
    direction_ = origin_direction_;
}

double PreisachLoop::branch(int direction, double e) const {
    const double shift = direction > 0 ? -ec_ : ec_;
    return ps_ * std::tanh((e + shift) / (2.0 * width_));
}

double PreisachLoop::evaluate(double e) const {
    const Turn start = turns_.empty() ? origin_ : turns_.back();
    double target_f;
    double target_p;
    if (turns_.size() >= 2) {
        const Turn& t = turns_[turns_.size() - 2];
        target_f = branch(direction_, t.field);
        target_p = t.pol;
    } else {
        target_f = direction_ * ps_;
        target_p = direction_ * ps_;
    }
    const double start_f = branch(direction_, start.field);
    const double span = target_f - start_f;
    if (std::abs(span) < 1e-300) return start.pol;
    const double frac = (branch(direction_, e) - start_f) / span;
    const double p = start.pol + (target_p - start.pol) * frac;
    return std::clamp(p, -ps_, ps_);
}

double PreisachLoop::apply(double e) {
    if (e == field_) return pol_;
    const int d = e > field_ ? 1 : -1;
    if (direction_ == 0) {
        direction_ = d;
        origin_direction_ = d;
    } else if (d != direction_) {
        turns_.push_back({field_, pol_});
        direction_ = d;
    }
    // Completing a minor loop wipes out its pair of turning points.
    while (turns_.size() >= 2) {
        const double closing = turns_[turns_.size() - 2].field;
        const bool passed = d > 0 ? e >= closing : e <= closing;
        if (!passed) break;
        turns_.pop_back();
        turns_.pop_back();
    }
    field_ = e;
    pol_ = evaluate(e);
    return pol_;
}

double preisach_polarization(const FeFETParams& p, std::span<const double> field_history) {
    if (field_history.empty()) throw DomainError("empty field history");
    PreisachLoop loop(p);
    for (double e : field_history) loop.apply(e);
    return loop.polarization();
}

double fefet_programmed_polarization(const FeFETParams& p, double volts) {
    // 1 V/nm = 10 MV/cm
    const std::array<double, 2> history{10.0 * volts / p.t_fe_nm, 0.0};
    return preisach_polarization(p, history);
}

double fefet_memory_window(const FeFETParams& p) {
    return p.k_mw * 2.0 * (0.1 * p.ec_mv_cm) * p.t_fe_nm;
}

// ---------------------------------------------------------------------------
// FeFET channel

double FefetChannel::current(double v_gs, double v_ds, FefetState s) const {
    const double nphi = slope_n * kThermalVoltage;
    const double u = (v_gs - threshold(s)) / nphi;
    return i_spec * (ekv_f(u) - ekv_f(u - v_ds / kThermalVoltage));
}

double FefetChannel::conductance(double v_gs, double v_ds, FefetState s) const {
    const double nphi = slope_n * kThermalVoltage;
    const double u = (v_gs - threshold(s)) / nphi;
    return i_spec * ekv_df(u - v_ds / kThermalVoltage) / kThermalVoltage;
}

namespace {

struct ReferenceFit {
    FefetChannel channel;
    double vt_mid = 0.0;
    double half_window = 0.0;
    double window_ref = 0.0;    // memory window at 7 nm, k_mw = 1
    double reset_frac_ref = 0.0;  // |P| / Pr after the default reset pulse at 7 nm
};

// Fit (Is, n, VT_set, VT_reset) so the four corner chords at the read bias
// reproduce the reference FeFET corner resistances.
ReferenceFit fit_reference() {
    const CellStateResistances target = reference_corners(TechnologyKind::FeFET);
    const double v = kReadCellVoltage;
    const std::array<double, 4> log_target = {
        std::log(v / target.r_on), std::log(v / target.r_hrs),
        std::log(v / target.r_off), std::log(v / target.r_off_h)};
    const std::array<double, 4> vgs = {kReadGateVoltage, kReadGateVoltage, 0.0, 0.0};
    const std::array<FefetState, 4> st = {FefetState::Set, FefetState::Reset, FefetState::Set,
                                          FefetState::Reset};

    auto residual = [&](const Eigen::Vector4d& x) {
        FefetChannel c{std::exp(x[0]), std::exp(x[1]), x[2], x[3]};
        Eigen::Vector4d r;
        for (int k = 0; k < 4; ++k) r[k] = std::log(c.current(vgs[k], v, st[k])) - log_target[k];
        return r;
    };

    Eigen::Vector4d x(std::log(4.0e-6), std::log(3.8), 0.59, 1.11);
    Eigen::Vector4d r = residual(x);
    for (int it = 0; it < 200 && r.norm() > 1e-13; ++it) {
        Eigen::Matrix4d jac;
        for (int j = 0; j < 4; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
            Eigen::Vector4d xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
        }
        const Eigen::Vector4d step = jac.fullPivLu().solve(-r);
        double lambda = 1.0;
        bool accepted = false;
        for (int k = 0; k < 40; ++k) {
            const Eigen::Vector4d xn = x + lambda * step;
            const Eigen::Vector4d rn = residual(xn);
            if (rn.allFinite() && rn.norm() < r.norm()) {
                x = xn;
                r = rn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) break;
    }
    if (!(r.norm() < 1e-9))
        throw ConvergenceError("FeFET reference calibration did not converge", r.norm(), 200);

    ReferenceFit fit;
    fit.channel = FefetChannel{std::exp(x[0]), std::exp(x[1]), x[2], x[3]};
    fit.vt_mid = 0.5 * (x[2] + x[3]);
    fit.half_window = 0.5 * (x[3] - x[2]);
    const FeFETParams ref = fefet_params_for_thickness(7.0);
    fit.window_ref = fefet_memory_window(ref);
    fit.reset_frac_ref = -fefet_programmed_polarization(ref, ref.v_reset) / ref.pr_uc_cm2;
    return fit;
}

const ReferenceFit& reference_fit() {
    static const ReferenceFit fit = fit_reference();
    return fit;
}

}  // namespace

FefetDevice FefetDevice::calibrated(const FeFETParams& p, double r_on_target) {
    if (!(r_on_target > 0)) throw DomainError("FeFET R_ON target must be positive");
    const ReferenceFit& ref = reference_fit();

    FefetDevice dev;
    dev.params_ = p;
    dev.channel_ = ref.channel;

    const double reset_frac = -fefet_programmed_polarization(p, p.v_reset) / p.pr_uc_cm2;
    dev.channel_.vt_reset = ref.vt_mid + ref.half_window * (fefet_memory_window(p) / ref.window_ref) *
                                             (reset_frac / ref.reset_frac_ref);

    // Set threshold pinned by the ON corner: I(0.7, 0.25) = 0.25 / R_ON.
    const double i_target = kReadCellVoltage / r_on_target;
    double lo = -5.0, hi = 5.0;  // current is decreasing in VT
    FefetChannel c = dev.channel_;
    auto on_current = [&](double vt) {
        c.vt_set = vt;
        return c.current(kReadGateVoltage, kReadCellVoltage, FefetState::Set);
    };
    if (on_current(lo) < i_target || on_current(hi) > i_target)
        throw DomainError("FeFET R_ON target " + std::to_string(r_on_target) + " ohm not reachable");
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (on_current(mid) > i_target)
            lo = mid;
        else
            hi = mid;
    }
    dev.channel_.vt_set = 0.5 * (lo + hi);
    return dev;
}

double fefet_ids(double v_gs, double v_ds, FefetState state, const FeFETParams& p) {
    if (v_gs < -kRangeSlack || v_gs > kReadGateVoltage + kRangeSlack)
        throw DomainError("FeFET v_gs outside [0, 0.7] V");
    if (v_ds < -kRangeSlack || v_ds > kReadCellVoltage + kRangeSlack)
        throw DomainError("FeFET v_ds outside [0, 0.25] V");
    return FefetDevice::calibrated(p, 60e3).ids(v_gs, v_ds, state);
}

// ---------------------------------------------------------------------------
// SOT-MRAM

double mtj_resistance(double t_mgo_nm, MtjState state) {
    static constexpr std::array<double, 3> t = {1.1, 1.2, 1.3};
    static constexpr std::array<double, 3> r_p = {8e3, 12e3, 20e3};
    static constexpr std::array<double, 3> r_ap = {28e3, 52e3, 100e3};
    if (!(t_mgo_nm >= t.front() - kRangeSlack && t_mgo_nm <= t.back() + kRangeSlack))
        throw DomainError("MgO thickness " + std::to_string(t_mgo_nm) + " nm outside [1.1, 1.3] nm");
    const auto& r = state == MtjState::Parallel ? r_p : r_ap;
    const double x = std::clamp(t_mgo_nm, t.front(), t.back());
    std::size_t k = x < t[1] ? 0 : 1;
    const double w = (x - t[k]) / (t[k + 1] - t[k]);
    if (w <= 0.0) return r[k];
    if (w >= 1.0) return r[k + 1];
    return std::exp((1.0 - w) * std::log(r[k]) + w * std::log(r[k + 1]));
}

// ---------------------------------------------------------------------------
// 8T-SRAM read port

namespace {

struct SramMap {
    std::array<double, 5> x{0.45, 0.48, 0.52, 0.6, 0.7};
    std::array<double, 5> y{};  // ln R
    std::array<double, 5> d{};  // dy/dx

    SramMap() {
        const std::array<double, 5> r = {250e3, 150e3, 60e3, 20e3, 10e3};
        for (int k = 0; k < 5; ++k) y[k] = std::log(r[k]);
        std::array<double, 4> h{}, delta{};
        for (int k = 0; k < 4; ++k) {
            h[k] = x[k + 1] - x[k];
            delta[k] = (y[k + 1] - y[k]) / h[k];
        }
        for (int k = 1; k < 4; ++k) {
            if (delta[k - 1] * delta[k] <= 0) {
                d[k] = 0;
            } else {
                const double w1 = 2 * h[k] + h[k - 1];
                const double w2 = h[k] + 2 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d[4] = end_slope(h[3], h[2], delta[3], delta[2]);
    }

    static double end_slope(double h0, double h1, double m0, double m1) {
        double s = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if (s * m0 <= 0) return 0.0;
        if (m0 * m1 <= 0 && std::abs(s) > 3 * std::abs(m0)) return 3 * m0;
        return s;
    }

    double operator()(double v) const {
        std::size_t k = 0;
        while (k < 3 && v > x[k + 1]) ++k;
        const double h = x[k + 1] - x[k];
        const double t = (v - x[k]) / h;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        return h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1];
    }
};

const SramMap& sram_map() {
    static const SramMap m;
    return m;
}

}  // namespace

double sram_on_resistance(double v_bias) {
    if (!(v_bias >= kSramBiasMin - kRangeSlack && v_bias <= kSramBiasMax + kRangeSlack))
        throw DomainError("SRAM read bias " + std::to_string(v_bias) + " V outside [0.45, 0.7] V");
    return std::exp(sram_map()(std::clamp(v_bias, kSramBiasMin, kSramBiasMax)));
}

double sram_bias_for_resistance(double r_on) {
    const double r_hi = sram_on_resistance(kSramBiasMin);
    const double r_lo = sram_on_resistance(kSramBiasMax);
    if (!(r_on >= r_lo * (1 - 1e-12) && r_on <= r_hi * (1 + 1e-12)))
        throw DomainError("SRAM R_ON " + std::to_string(r_on) +
                          " ohm not reachable with read bias in [0.45, 0.7] V");
    const double target = std::log(r_on);
    double lo = kSramBiasMin, hi = kSramBiasMax;  // ln R decreasing in bias
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sram_map()(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Corner tables

double CellStateResistances::at(int input, int weight) const {
    if (input)
        return weight ? r_on : r_hrs;
    return weight ? r_off : r_off_h;
}

CellStateResistances reference_corners(TechnologyKind tech) {
    switch (tech) {
        case TechnologyKind::SRAM: return {60e3, 2.1e11, 1.5e11, 4.5e11};
        case TechnologyKind::FeFET: return {60e3, 4e6, 2.3e7, 4.6e9};
        case TechnologyKind::ReRAM: return {60e3, 2.3e6, 2.1e8, 2.1e8};
        case TechnologyKind::SOTMRAM: return {20e3, 1e5, 2.1e8, 2.1e8};
    }
    throw DomainError("unknown technology");
}

// ---------------------------------------------------------------------------
// Curves

namespace {

CurvePoint eval_reram(const ReramSeriesCurve& c, double v) {
    const double is = c.i_scale;
    if (c.r_series <= 0.0) {
        return {is * std::sinh(v / c.v0), is * std::cosh(v / c.v0) / c.v0};
    }
    if (v == 0.0) return {0.0, 1.0 / (c.r_series + c.v0 / is)};
    const double a = std::abs(v);
    // h(I) = I R + V0 asinh(I / Is) - |v| is increasing and concave on I >= 0,
    // so Newton from the small-signal estimate (a lower bound) climbs
    // monotonically to the root.
    double i = a / (c.r_series + c.v0 / is);
    for (int it = 0; it < 100; ++it) {
        const double h = i * c.r_series + c.v0 * std::asinh(i / is) - a;
        const double dh = c.r_series + c.v0 / std::hypot(is, i);
        const double step = h / dh;
        i -= step;
        if (std::abs(step) <= 1e-16 * i) break;
    }
    i = std::min(i, a / c.r_series);
    const double g = 1.0 / (c.r_series + c.v0 / std::hypot(is, i));
    return {v < 0 ? -i : i, g};
}

}  // namespace

CurvePoint evaluate(const CellCurve& curve, double v) {
    return std::visit(
        [v](const auto& c) -> CurvePoint {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, LinearCurve>) {
                return {c.conductance * v, c.conductance};
            } else if constexpr (std::is_same_v<T, ReramSeriesCurve>) {
                return eval_reram(c, v);
            } else {
                return {c.channel.current(c.v_gs, v, c.state),
                        c.channel.conductance(c.v_gs, v, c.state)};
            }
        },
        curve);
}

// ---------------------------------------------------------------------------
// Bit-cell model

BitCellModel BitCellModel::calibrate(TechnologyKind tech, Fidelity fidelity,
                                     const DeviceKnobs& knobs) {
    BitCellModel m;
    m.tech_ = tech;
    m.fidelity_ = fidelity;
    m.knobs_ = knobs;
    m.corners_ = reference_corners(tech);
    if (knobs.r_on_ohms && !(*knobs.r_on_ohms > 0))
        throw DomainError("R_ON must be positive");
    const bool physical = fidelity == Fidelity::Level1Physical;

    switch (tech) {
        case TechnologyKind::SRAM: {
            if (knobs.r_on_ohms) m.corners_.r_on = *knobs.r_on_ohms;
            try {
                m.sram_bias_ = sram_bias_for_resistance(m.corners_.r_on);
            } catch (const DomainError&) {
                if (physical) throw;
            }
            if (physical) m.corners_.r_on = sram_on_resistance(*m.sram_bias_);
            break;
        }
        case TechnologyKind::ReRAM: {
            if (knobs.r_on_ohms) m.corners_.r_on = *knobs.r_on_ohms;
            if (!(knobs.reram_access_ohms >= 0))
                throw DomainError("ReRAM access resistance must be non-negative");
            try {
                m.reram_gap_on_ = reram_gap_for_resistance(ReRAMParams{}, m.corners_.r_on);
            } catch (const DomainError&) {
                if (physical) throw;
            }
            break;
        }
        case TechnologyKind::FeFET: {
            FeFETParams p = fefet_params_for_thickness(knobs.t_fe_nm);
            p.k_mw = knobs.k_mw;
            p.v_reset = knobs.v_reset;
            if (knobs.k_mw < 0) throw DomainError("k_mw must be non-negative");
            const double r_on = knobs.r_on_ohms.value_or(60e3);
            if (physical) {
                m.fefet_ = FefetDevice::calibrated(p, r_on);
            } else {
                // The ON corner is set directly; the remaining corners come
                // from the film at this thickness programmed to the nominal ON.
                m.fefet_ = FefetDevice::calibrated(p, 60e3);
            }
            const double v = kReadCellVoltage;
            const auto& ch = m.fefet_->channel();
            m.corners_.r_on = v / ch.current(kReadGateVoltage, v, FefetState::Set);
            m.corners_.r_hrs = v / ch.current(kReadGateVoltage, v, FefetState::Reset);
            m.corners_.r_off = v / ch.current(0.0, v, FefetState::Set);
            m.corners_.r_off_h = v / ch.current(0.0, v, FefetState::Reset);
            if (!physical) m.corners_.r_on = r_on;
            break;
        }
        case TechnologyKind::SOTMRAM: {
            if (knobs.r_on_ohms)
                throw DomainError("SOT-MRAM R_ON is set by the MgO thickness, not tuned directly");
            m.corners_.r_on = mtj_resistance(knobs.t_mgo_nm, MtjState::Parallel);
            m.corners_.r_hrs = mtj_resistance(knobs.t_mgo_nm, MtjState::AntiParallel);
            break;
        }
    }
    m.calibrated_ = true;
    return m;
}

CellCurve BitCellModel::physical_curve(int input, int weight) const {
    if (!calibrated_) throw StateError("bit-cell model used before calibration");
    switch (tech_) {
        case TechnologyKind::SRAM:
        case TechnologyKind::SOTMRAM:
            return LinearCurve{1.0 / corners_.at(input, weight)};
        case TechnologyKind::ReRAM: {
            if (!input) return LinearCurve{1.0 / corners_.at(input, weight)};
            if (weight && !reram_gap_on_)
                throw DomainError("ReRAM R_ON outside the reachable gap range");
            const ReRAMParams base;
            const double gap = weight ? *reram_gap_on_ : kReramGapMaxNm;
            return ReramSeriesCurve{base.i0_amps * std::exp(-gap / base.g0_nm), base.v0_volts,
                                    knobs_.reram_access_ohms};
        }
        case TechnologyKind::FeFET:
            return FefetCurve{fefet_->channel(), input ? kReadGateVoltage : 0.0,
                              weight ? FefetState::Set : FefetState::Reset};
    }
    throw StateError("unknown technology");
}

CellCurve BitCellModel::curve(int input, int weight) const {
    if (!calibrated_) throw StateError("bit-cell model used before calibration");
    if (fidelity_ == Fidelity::Level1Physical) return physical_curve(input, weight);
    return LinearCurve{1.0 / corners_.at(input, weight)};
}

double BitCellModel::operating_point_resistance(int input, int weight) const {
    const double v = kReadCellVoltage;
    return v / evaluate(physical_curve(input, weight), v).current;
}

CurvePoint bitcell_iv(const BitCellModel& model, int input, int weight, double v_cell) {
    return evaluate(model.curve(input, weight), v_cell);
}

}  // namespace xbar::devices
