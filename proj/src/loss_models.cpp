#include "bess/loss_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bess {

namespace {

constexpr int kValidationSamples = 2000;

template <std::size_t N>
double horner(const std::array<double, N>& c, double x) {
  double y = 0.0;
  for (std::size_t i = N; i-- > 0;)
    y = y * x + c[i];
  return y;
}

} // namespace

void TransformerParams::validate() const {
  if (!(no_load_loss_w > 0.0))
    throw std::invalid_argument("transformer.no_load_loss_w must be > 0");
  if (!(rated_load_loss_w > 0.0))
    throw std::invalid_argument("transformer.rated_load_loss_w must be > 0");
  if (!(rated_power_w > 0.0))
    throw std::invalid_argument("transformer.rated_power_w must be > 0");
  if (!(rated_load_loss_w < rated_power_w))
    throw std::invalid_argument("transformer.rated_load_loss_w must be below rated_power_w");
}

PcsEfficiencyCoeffs::PcsEfficiencyCoeffs()
    : a_{0.7868, 0.7955, -2.073, 2.137, -0.8137} {}

PcsEfficiencyCoeffs::PcsEfficiencyCoeffs(const std::array<double, 5>& a) : a_(a) {
  for (int i = 1; i <= kValidationSamples; ++i) {
    const double x = static_cast<double>(i) / kValidationSamples;
    const double y = horner(a_, x);
    if (!(y > 0.0 && y <= 1.0))
      throw std::invalid_argument("PCS efficiency polynomial leaves (0, 1] at load factor " +
                                  std::to_string(x));
  }
}

double PcsEfficiencyCoeffs::evaluate(double load_factor) const { return horner(a_, load_factor); }

OcvCoeffs::OcvCoeffs() : b_{2.484, 2.608, -5.252, 3.603} {}

OcvCoeffs::OcvCoeffs(const std::array<double, 4>& b) : b_(b) {
  double prev = horner(b_, 0.0);
  if (!(prev > 0.0))
    throw std::invalid_argument("OCV polynomial must be positive at SoC 0");
  for (int i = 1; i <= kValidationSamples; ++i) {
    const double y = horner(b_, static_cast<double>(i) / kValidationSamples);
    if (!(y > 0.0) || y < prev)
      throw std::invalid_argument("OCV polynomial must be positive and non-decreasing on [0, 1]");
    prev = y;
  }
}

double OcvCoeffs::evaluate(double soc) const { return horner(b_, soc); }

double OcvCoeffs::integral(double soc) const {
  const std::array<double, 5> anti{0.0, b_[0], b_[1] / 2.0, b_[2] / 3.0, b_[3] / 4.0};
  return horner(anti, soc);
}

void CellParams::validate() const {
  if (!(r_ohm > 0.0)) throw std::invalid_argument("cell.r_ohm must be > 0");
  if (!(r_pol > 0.0)) throw std::invalid_argument("cell.r_pol must be > 0");
  if (!(c_pol > 0.0)) throw std::invalid_argument("cell.c_pol must be > 0");
  if (!(capacity_ah > 0.0)) throw std::invalid_argument("cell.capacity_ah must be > 0");
}

double transformer_loss(double load_factor, const TransformerParams& p) {
  if (!(load_factor >= 0.0))
    throw std::domain_error("transformer load factor must be >= 0");
  return p.no_load_loss_w + load_factor * load_factor * p.rated_load_loss_w;
}

double pcs_efficiency(double load_factor, const PcsEfficiencyCoeffs& c) {
  if (!(load_factor >= 0.0 && load_factor <= 1.0))
    throw std::domain_error("PCS load factor must lie in [0, 1]");
  return std::clamp(c.evaluate(load_factor), kMinPcsEfficiency, 1.0);
}

double open_circuit_voltage(double soc, const OcvCoeffs& c) {
  if (!(soc >= 0.0 && soc <= 1.0))
    throw std::domain_error("SoC must lie in [0, 1]");
  return c.evaluate(soc);
}

RcState step_polarization(const RcState& state, double terminal_current, double dt,
                          const CellParams& p) {
  if (!(dt >= 0.0))
    throw std::domain_error("time step must be >= 0");
  const double decay = std::exp(-dt / p.time_constant_s());
  return {terminal_current + (state.i_pol - terminal_current) * decay, state.t_elapsed + dt};
}

double steady_state_loss(double terminal_current, const CellParams& p) {
  return terminal_current * terminal_current * (p.r_ohm + p.r_pol);
}

double transient_loss(const RcState& state, double terminal_current, const CellParams& p) {
  return p.r_pol * (state.i_pol * state.i_pol - terminal_current * terminal_current);
}

double total_battery_loss(const RcState& state, double terminal_current, const CellParams& p) {
  return p.r_ohm * terminal_current * terminal_current + p.r_pol * state.i_pol * state.i_pol;
}

RcStepIntegrals integrate_polarization(double i_pol_start, double terminal_current, double dt,
                                       double tau) {
  const double x = dt / tau;
  const double d = i_pol_start - terminal_current;
  const double one_minus_e1 = -std::expm1(-x);
  const double one_minus_e2 = -std::expm1(-2.0 * x);
  RcStepIntegrals out;
  out.i_pol_end = terminal_current + d * std::exp(-x);
  out.int_i_pol = terminal_current * dt + d * tau * one_minus_e1;
  out.int_i_pol_sq = terminal_current * terminal_current * dt +
                     2.0 * terminal_current * d * tau * one_minus_e1 +
                     0.5 * d * d * tau * one_minus_e2;
  return out;
}

} // namespace bess
