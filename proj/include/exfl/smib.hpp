#pragma once

#include <array>
#include <complex>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exfl/exec.hpp"

namespace exfl::smib {

using cplx = std::complex<double>;

/// Synchronous generator data in per-unit on the machine base. Defaults are
/// the 13.8 kV, 150 MVA, 50 Hz unit the study uses.
struct MachineParams {
  double X_d = 1.83;
  double X_q = 1.7;
  double X_d_p = 0.24;
  double X_q_p = 0.43;
  double X_d_pp = 0.20;
  double X_q_pp = 0.26;
  // Nameplate time constants in seconds. When short_circuit_constants is set
  // they are short-circuit values and are converted to open-circuit values
  // through the reactance ratios.
  double T_d_p = 0.3;
  double T_d_pp = 0.04;
  double T_q_pp = 0.031;
  double T_q_p = 0.1;  // not on the nameplate; only used by the E'_d state
  bool short_circuit_constants = true;
  double R_stator = 0.003;
  double H = 3.6;
  double D = 0.0;  // mechanical damping, pu torque / pu speed
  double f_nom = 50.0;
  double S_base = 150e6;
  double V_base = 13.8e3;
  double X_s = 1.7;  // reactance for power-angle checks; E_f is the EMF behind X_q
  int model_order = 6;  // 6 = subtransient two-axis, 4 = transient two-axis

  double T_d0_p() const;
  double T_q0_p() const;
  double T_d0_pp() const;
  double T_q0_pp() const;
  double z_base() const { return V_base * V_base / S_base; }
  double omega_base() const;
  void validate() const;
};

/// Rotating exciter with first-order regulator and washout rate feedback.
struct ExciterParams {
  double Ka = 2.50;
  double Ta = 0.001;
  double Ke = 1.5;
  double Te = 0.3;
  double Kf = 1.0;
  double Tf = 0.003;
  double Vf_min = -6.0;
  double Vf_max = 6.0;

  void validate() const;
};

/// Generator bus -> local series load -> step-up transformer -> two parallel
/// circuits -> infinite bus. Impedances are per-unit except local_load_ohm.
struct NetworkParams {
  std::array<cplx, 2> line_impedances{cplx{0.0, 0.5}, cplx{0.0, 0.5}};
  cplx transformer_impedance{0.0, 0.15};
  cplx local_load_ohm{0.09, 0.056};
  double V_infinite_bus = 1.0;
  double fault_impedance = 1e-4;

  cplx local_load_pu(const MachineParams& m) const { return local_load_ohm / m.z_base(); }
  void validate() const;
};

struct PlantParams {
  MachineParams machine;
  ExciterParams exciter;
  NetworkParams network;
};

enum class DisturbanceKind {
  VrefStep,
  TerminalFaultSelfClearing,
  TerminalFaultClearedByTrip,
  LineTrip,
  LineReclose,
};

std::string_view to_string(DisturbanceKind kind);
DisturbanceKind parse_disturbance_kind(std::string_view text);

inline constexpr double kDefaultFaultDuration = 0.120;

/// One disturbance. VrefStep scales the reference by (1 + vref_step) from
/// t_start on. Faults last `duration`. LineTrip removes the second circuit for
/// good; LineReclose removes it at t_start and restores it after `duration`.
struct DisturbanceEvent {
  DisturbanceKind kind = DisturbanceKind::TerminalFaultSelfClearing;
  double t_start = 1.0;
  double duration = kDefaultFaultDuration;
  double vref_step = 0.10;

  double t_end() const;
};

struct SimSignals {
  double t = 0;
  double V_T = 0, V_d = 0, V_q = 0;
  double omega = 1;
  double delta = 0;  // load angle between the q-axis and the terminal voltage, rad
  double P = 0, Q = 0;
  double V_f = 0;  // exciter output (field voltage)
  double E_f = 0;  // internal EMF behind X_q, q-axis component
};

struct SimTrace {
  std::vector<SimSignals> signals;
  std::string scenario_id;
  double dt_sample = 0.005;
  double V_ref = 0;  // pre-disturbance regulator reference
};

enum StateIndex : std::size_t {
  kRotorAngle,  // q-axis angle relative to the infinite bus, rad
  kOmega,
  kEqP,
  kEdP,
  kEqPP,
  kEdPP,
  kVr,   // regulator output
  kEfd,  // exciter output
  kVfbLag,  // rate-feedback filter state
  kStateCount
};

struct SimState {
  double t = 0;
  std::array<double, kStateCount> x{};
  double V_ref = 0;    // terminal voltage setpoint
  double Vr_bias = 0;  // regulator output at zero voltage error
  double P_mech = 0;
  int lines_in_service = 2;
  bool fault_on = false;
};

/// Round-rotor power-angle relation P = Ef * Vt / Xs * sin(delta).
double power_angle_p(double E_f, double V_T, double X_s, double delta);

/// Equilibrium delivering P_target at terminal voltage V_T_target with
/// omega = 1; the regulator reference that holds it is stored in V_ref.
SimState init_steady_state(const PlantParams& plant, double P_target, double V_T_target);

/// Algebraic network solution for a state.
SimSignals signals(const SimState& state, const PlantParams& plant);

/// Right-hand side of the state equations.
std::array<double, kStateCount> derivatives(const SimState& state, const PlantParams& plant);

/// One explicit RK4 step of size h (h <= Ta/5).
SimState step(const SimState& state, const PlantParams& plant, double h);

struct OperatingPoint {
  double P_target = 0.6;
  double V_T_target = 1.0;
};

struct Scenario {
  std::string id;
  OperatingPoint op;
  std::vector<DisturbanceEvent> events;
  double t_end = 10.0;
  double dt_sample = 0.005;
  double h = 2e-4;  // integration step, clipped so it divides dt_sample
  double settle_time = 0.5;
};

/// Scenario class label: the part of the id before the first '/'.
std::string_view scenario_class(std::string_view scenario_id);

SimTrace run_scenario(const PlantParams& plant, const Scenario& scenario);

/// Runs independent scenarios; output order follows input order regardless
/// of execution policy.
std::vector<SimTrace> run_scenarios(const PlantParams& plant, std::span<const Scenario> scenarios,
                                    Execution exec = Execution::Parallel);

/// Six traces covering every disturbance class once (Vref +/-10% share a class).
std::vector<Scenario> default_scenarios(const OperatingPoint& op = {});

/// CSV: t,Vt,Vd,Vq,omega,delta,P,Q,Vf,Ef,scenario_id
void write_traces_csv(std::ostream& os, std::span<const SimTrace> traces);
std::vector<SimTrace> read_traces_csv(std::istream& is);

}  // namespace exfl::smib
