#pragma once

#include <array>
#include <stdexcept>

namespace bess {

// Positive current/power charges the battery; discharge is negative.

struct TransformerParams {
  double no_load_loss_w = 5000.0;     // core loss, illustrative default
  double rated_load_loss_w = 35000.0; // copper loss at rated load
  double rated_power_w = 6.3e6;

  void validate() const;
  bool operator==(const TransformerParams&) const = default;
};

/// Quartic fit of converter efficiency against load factor.
/// Construction rejects coefficient sets whose value leaves (0, 1] on (0, 1].
class PcsEfficiencyCoeffs {
public:
  PcsEfficiencyCoeffs();
  explicit PcsEfficiencyCoeffs(const std::array<double, 5>& a);

  const std::array<double, 5>& coefficients() const { return a_; }
  double evaluate(double load_factor) const;

  bool operator==(const PcsEfficiencyCoeffs&) const = default;

private:
  std::array<double, 5> a_;
};

/// Cubic open-circuit voltage of one cell over SoC. Must stay positive and
/// non-decreasing on [0, 1].
class OcvCoeffs {
public:
  OcvCoeffs();
  explicit OcvCoeffs(const std::array<double, 4>& b);

  const std::array<double, 4>& coefficients() const { return b_; }
  double evaluate(double soc) const;
  /// Antiderivative in SoC, zero at soc = 0.
  double integral(double soc) const;

  bool operator==(const OcvCoeffs&) const = default;

private:
  std::array<double, 4> b_;
};

struct CellParams {
  double r_ohm = 0.0232;
  double r_pol = 0.0185;
  double c_pol = 12091.0;
  double capacity_ah = 12.5;
  OcvCoeffs ocv;

  double time_constant_s() const { return r_pol * c_pol; }
  void validate() const;
  bool operator==(const CellParams&) const = default;
};

/// Current through the polarization resistor of the RC branch.
struct RcState {
  double i_pol = 0.0;
  double t_elapsed = 0.0;

  bool operator==(const RcState&) const = default;
};

double transformer_loss(double load_factor, const TransformerParams& p);

/// Clamped to [kMinPcsEfficiency, 1].
double pcs_efficiency(double load_factor, const PcsEfficiencyCoeffs& c);
inline constexpr double kMinPcsEfficiency = 1e-3;

double open_circuit_voltage(double soc, const OcvCoeffs& c);

/// Exact update of the RC branch for a current held constant over dt.
RcState step_polarization(const RcState& state, double terminal_current, double dt,
                          const CellParams& p);

double steady_state_loss(double terminal_current, const CellParams& p);
double transient_loss(const RcState& state, double terminal_current, const CellParams& p);
double total_battery_loss(const RcState& state, double terminal_current, const CellParams& p);

/// Time integrals of the RC branch over one constant-current step, used for
/// exact energy ledgers. All values in SI (A*s, A^2*s).
struct RcStepIntegrals {
  double i_pol_end = 0.0;
  double int_i_pol = 0.0;    // integral of i_pol dt
  double int_i_pol_sq = 0.0; // integral of i_pol^2 dt
};

RcStepIntegrals integrate_polarization(double i_pol_start, double terminal_current, double dt,
                                       double tau);

} // namespace bess
