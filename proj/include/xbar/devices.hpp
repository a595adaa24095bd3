#pragma once

// Bit-cell models for the four synaptic technologies.
//
// Every cell is exposed to the circuit layer as a two-terminal I(V) element
// selected by (input bit, weight bit). Level0 cells are linear resistors
// taken from the per-technology corner table; Level1 cells dispatch to the
// device physics (ReRAM filament gap, FeFET channel with a ferroelectric
// threshold shift, SOT-MRAM tunnel junction, 8T-SRAM read port).

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "xbar/common.hpp"

namespace xbar::devices {

// Read bias point: WL 0.7 V, BL 0.25 V.
inline constexpr double kReadGateVoltage = 0.7;
inline constexpr double kReadCellVoltage = 0.25;
inline constexpr double kThermalVoltage = 0.025852;  // kT/q at 300 K

// ---------------------------------------------------------------------------
// ReRAM: I = I0 * exp(-g/g0) * sinh(V/V0), Al-doped HfOx compact model.

inline constexpr double kReramGapMinNm = 0.34;
inline constexpr double kReramGapMaxNm = 1.09;

struct ReRAMParams {
    double i0_amps = 0.2e-3;
    double g0_nm = 0.15;
    double v0_volts = 0.35;
    double gap_nm = kReramGapMinNm;
};

double reram_current(const ReRAMParams& p, double v);
double reram_conductance(const ReRAMParams& p, double v);  // dI/dV
// Zero-bias resistance V0 / (I0 exp(-g/g0)).
double reram_small_signal_resistance(const ReRAMParams& p);
// Inverse of the zero-bias resistance; the gap field of `p` is ignored.
double reram_gap_for_resistance(const ReRAMParams& p, double r_target);

// ---------------------------------------------------------------------------
// FeFET

struct FeFETParams {
    double t_fe_nm = 7.0;
    double ps_uc_cm2 = 30.0;   // saturated polarization
    double pr_uc_cm2 = 27.0;   // remanent polarization
    double eps_r = 22.0;
    double ec_mv_cm = 2.4;     // coercive field
    double k_mw = 1.0;         // memory-window scale
    double v_set = 4.0;        // program pulse amplitudes, volts
    double v_reset = -4.0;

    // Branch width of the tanh hysteresis: Ec / (2 atanh(Pr/Ps)).
    double loop_width() const;
};

// Film parameters for T_FE = 5, 6, 7 nm. Other thicknesses are a domain error.
FeFETParams fefet_params_for_thickness(double t_fe_nm);

// Rate-independent ferroelectric hysteresis with return-point memory.
//
// Major branches are P = Ps tanh((E -/+ Ec) / (2 delta)). A branch started
// at a reversal point heads toward the previous (still open) reversal point,
// or toward saturation when none is open; it is affine in the major-branch
// shape function, so P is continuous at every reversal and closes exactly
// when a minor loop is completed.
class PreisachLoop {
  public:
    explicit PreisachLoop(const FeFETParams& p);

    // Put the film into +/- saturation.
    void saturate(int sign);
    // Move the applied field (MV/cm) and return the new polarization (uC/cm^2).
    double apply(double field_mv_cm);

    double polarization() const { return pol_; }
    double field() const { return field_; }

  private:
    struct Turn {
        double field;
        double pol;
    };
    double branch(int direction, double e) const;
    double evaluate(double e) const;

    double ps_;
    double ec_;
    double width_;
    double field_ = 0.0;
    double pol_ = 0.0;
    int direction_ = 0;
    Turn origin_{0.0, 0.0};
    int origin_direction_ = 0;
    std::vector<Turn> turns_;
};

// Polarization after applying `field_history` (MV/cm) to a virgin film.
double preisach_polarization(const FeFETParams& p, std::span<const double> field_history);

// Remanent polarization after a single program pulse of `volts` on the gate,
// starting from a virgin film.
double fefet_programmed_polarization(const FeFETParams& p, double volts);

// Memory window k_mw * 2 * Ec * T_FE, in volts.
double fefet_memory_window(const FeFETParams& p);

enum class FefetState { Set, Reset };

// Channel of the FeFET: EKV-style interpolation between exponential
// subthreshold conduction and soft saturation,
//   I = Is [F(u) - F(u - Vds/phi_t)],  u = (Vgs - VT) / (n phi_t),
//   F(x) = ln^2(1 + exp(x/2)).
struct FefetChannel {
    double i_spec = 0.0;
    double slope_n = 1.0;
    double vt_set = 0.0;
    double vt_reset = 0.0;

    double threshold(FefetState s) const { return s == FefetState::Set ? vt_set : vt_reset; }
    double current(double v_gs, double v_ds, FefetState s) const;
    double conductance(double v_gs, double v_ds, FefetState s) const;  // dI/dVds
};

// Calibrated FeFET: the transistor constants are fit once against the
// reference corner resistances at T_FE = 7 nm; the reset threshold follows
// the memory window of the given thickness and the set threshold is re-fit
// so that the ON corner hits `r_on_target`.
class FefetDevice {
  public:
    static FefetDevice calibrated(const FeFETParams& p, double r_on_target);

    const FeFETParams& params() const { return params_; }
    const FefetChannel& channel() const { return channel_; }
    double ids(double v_gs, double v_ds, FefetState s) const {
        return channel_.current(v_gs, v_ds, s);
    }

  private:
    FeFETParams params_;
    FefetChannel channel_;
};

// Range-checked drain current: 0 <= v_gs <= 0.7 V, 0 <= v_ds <= 0.25 V,
// using the device calibrated to R_ON = 60 kOhm at the thickness in `p`.
double fefet_ids(double v_gs, double v_ds, FefetState state, const FeFETParams& p);

// ---------------------------------------------------------------------------
// SOT-MRAM read path (MTJ + read access transistor folded together).

enum class MtjState { Parallel, AntiParallel };

double mtj_resistance(double t_mgo_nm, MtjState state);

// ---------------------------------------------------------------------------
// 8T-SRAM read port: R_ON as a function of the read-port gate bias.

inline constexpr double kSramBiasMin = 0.45;
inline constexpr double kSramBiasMax = 0.7;

double sram_on_resistance(double v_bias);
double sram_bias_for_resistance(double r_on);

// ---------------------------------------------------------------------------
// Corner resistances for (input, weight) = (1,1), (1,0), (0,1), (0,0).

struct CellStateResistances {
    double r_on = 0.0;
    double r_hrs = 0.0;
    double r_off = 0.0;
    double r_off_h = 0.0;

    double at(int input, int weight) const;
};

// Reference corner table for each technology.
CellStateResistances reference_corners(TechnologyKind tech);

// ---------------------------------------------------------------------------
// I(V) elements handed to the solver.

struct CurvePoint {
    double current = 0.0;
    double conductance = 0.0;  // dI/dV
};

struct LinearCurve {
    double conductance = 0.0;
};

// Series access resistance followed by the sinh filament element.
struct ReramSeriesCurve {
    double i_scale = 0.0;  // I0 exp(-g/g0)
    double v0 = 0.35;
    double r_series = 0.0;
};

struct FefetCurve {
    FefetChannel channel;
    double v_gs = 0.0;
    FefetState state = FefetState::Set;
};

using CellCurve = std::variant<LinearCurve, ReramSeriesCurve, FefetCurve>;

CurvePoint evaluate(const CellCurve& curve, double v);

// A curve plus a multiplicative current scale (used by device variations).
struct CellElement {
    CellCurve curve;
    double scale = 1.0;

    CurvePoint at(double v) const {
        CurvePoint p;
        if (const auto* lin = std::get_if<LinearCurve>(&curve))
            p = {lin->conductance * v, lin->conductance};
        else
            p = evaluate(curve, v);
        p.current *= scale;
        p.conductance *= scale;
        return p;
    }
};

// ---------------------------------------------------------------------------

struct DeviceKnobs {
    std::optional<double> r_on_ohms;  // SRAM / ReRAM / FeFET ON-resistance knob
    double t_fe_nm = 7.0;
    double t_mgo_nm = 1.3;
    double reram_access_ohms = 3e3;
    double k_mw = 1.0;
    double v_reset = -4.0;
};

class BitCellModel {
  public:
    BitCellModel() = default;  // uncalibrated

    static BitCellModel calibrate(TechnologyKind tech, Fidelity fidelity,
                                  const DeviceKnobs& knobs = {});

    bool calibrated() const { return calibrated_; }
    TechnologyKind tech() const { return tech_; }
    Fidelity fidelity() const { return fidelity_; }
    const DeviceKnobs& knobs() const { return knobs_; }

    // Level0 corner table. For Level1 models this is the calibrated table the
    // physics is checked against.
    const CellStateResistances& corners() const { return corners_; }

    // Element for the configured fidelity.
    CellCurve curve(int input, int weight) const;
    // Level1 element regardless of the configured fidelity.
    CellCurve physical_curve(int input, int weight) const;

    // Static resistance V/I of the Level1 element at the read bias.
    double operating_point_resistance(int input, int weight) const;

    // Physical knob bindings (absent when the target is outside the knob's
    // reachable range; Level1 calibration then fails).
    std::optional<double> sram_bias() const { return sram_bias_; }
    std::optional<double> reram_gap_on() const { return reram_gap_on_; }
    const std::optional<FefetDevice>& fefet() const { return fefet_; }

  private:
    bool calibrated_ = false;
    TechnologyKind tech_ = TechnologyKind::FeFET;
    Fidelity fidelity_ = Fidelity::Level0Linear;
    DeviceKnobs knobs_;
    CellStateResistances corners_;
    std::optional<double> sram_bias_;
    std::optional<double> reram_gap_on_;
    std::optional<FefetDevice> fefet_;
};

CurvePoint bitcell_iv(const BitCellModel& model, int input, int weight, double v_cell);

// G_ON of the model, 1 / R_ON.
inline double on_conductance(const BitCellModel& m) { return 1.0 / m.corners().r_on; }

}  // namespace xbar::devices
