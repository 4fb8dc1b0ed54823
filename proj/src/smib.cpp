#include "exfl/smib.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include "exfl/csv.hpp"
#include "exfl/error.hpp"

namespace exfl::smib {

namespace {

constexpr double kDivergenceLimit = 1e3;
constexpr double kUnstableHold = 1.0;
constexpr int kMaxEquilibriumIterations = 200;

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

// dq <-> network frame. q-axis sits at the rotor angle in the network frame.
cplx to_dq(cplx v, double rotor_angle) { return v * cplx{0, 1} * std::polar(1.0, -rotor_angle); }

struct Thevenin {
  cplx e;
  cplx z;
};

cplx external_impedance(const NetworkParams& net, const MachineParams& m, int lines) {
  cplx lines_z;
  if (lines >= 2) {
    const auto& z = net.line_impedances;
    lines_z = z[0] * z[1] / (z[0] + z[1]);
  } else {
    lines_z = net.line_impedances[0];
  }
  return net.local_load_pu(m) + net.transformer_impedance + lines_z;
}

Thevenin thevenin(const SimState& s, const PlantParams& p) {
  const cplx z_ext = external_impedance(p.network, p.machine, s.lines_in_service);
  const cplx v_inf{p.network.V_infinite_bus, 0.0};
  if (!s.fault_on) return {v_inf, z_ext};
  const cplx y = 1.0 / cplx{p.network.fault_impedance, 0.0} + 1.0 / z_ext;
  return {v_inf / z_ext / y, 1.0 / y};
}

struct Stator {
  double id, iq, vd, vq;
};

// Stator equations of the generator against the Thevenin equivalent of the
// network, solved for the dq currents.
Stator solve_stator(const SimState& s, const PlantParams& p) {
  const auto& m = p.machine;
  const bool sub = m.model_order == 6;
  const double xd = sub ? m.X_d_pp : m.X_d_p;
  const double xq = sub ? m.X_q_pp : m.X_q_p;
  const double ed = sub ? s.x[kEdPP] : s.x[kEdP];
  const double eq = sub ? s.x[kEqPP] : s.x[kEqP];
  const double ra = m.R_stator;

  const Thevenin th = thevenin(s, p);
  const cplx e_dq = to_dq(th.e, s.x[kRotorAngle]);
  const double r = th.z.real();
  const double x = th.z.imag();

  // (ra + r) id - (xq + x) iq = ed - Ed
  // (xd + x) id + (ra + r) iq = eq - Eq
  const double a11 = ra + r, a12 = -(xq + x), a21 = xd + x, a22 = ra + r;
  const double b1 = ed - e_dq.real(), b2 = eq - e_dq.imag();
  const double det = a11 * a22 - a12 * a21;
  Stator st;
  st.id = (b1 * a22 - a12 * b2) / det;
  st.iq = (a11 * b2 - a21 * b1) / det;
  st.vd = ed - ra * st.id + xq * st.iq;
  st.vq = eq - ra * st.iq - xd * st.id;
  return st;
}

void validate_events(const Scenario& sc) {
  std::vector<DisturbanceEvent> ev = sc.events;
  std::sort(ev.begin(), ev.end(),
            [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    require(e.t_start > sc.settle_time, "event starts before the initial settle time");
    require(e.t_start < sc.t_end, "event starts after t_end");
    if (e.kind != DisturbanceKind::VrefStep && e.kind != DisturbanceKind::LineTrip)
      require(e.duration > 0, "fault/reclose duration must be positive");
    if (i > 0) require(ev[i - 1].t_end() <= e.t_start, "events overlap in time");
  }
}

struct Action {
  long long step;
  int order;  // tie-break so that actions at one instant apply deterministically
  enum Kind { FaultOn, FaultOff, LineOut, LineIn, SetVref } kind;
  double value = 0;
};

std::vector<Action> schedule(const Scenario& sc, double h, double v_ref0) {
  std::vector<Action> out;
  const auto at = [h](double t) { return std::llround(t / h); };
  for (const auto& e : sc.events) {
    const long long s0 = at(e.t_start);
    const long long s1 = at(e.t_start + e.duration);
    switch (e.kind) {
      case DisturbanceKind::VrefStep:
        out.push_back({s0, 0, Action::SetVref, v_ref0 * (1.0 + e.vref_step)});
        break;
      case DisturbanceKind::TerminalFaultSelfClearing:
        out.push_back({s0, 0, Action::FaultOn});
        out.push_back({s1, 0, Action::FaultOff});
        break;
      case DisturbanceKind::TerminalFaultClearedByTrip:
        out.push_back({s0, 0, Action::FaultOn});
        out.push_back({s1, 0, Action::FaultOff});
        out.push_back({s1, 1, Action::LineOut});
        break;
      case DisturbanceKind::LineTrip:
        out.push_back({s0, 0, Action::LineOut});
        break;
      case DisturbanceKind::LineReclose:
        out.push_back({s0, 0, Action::LineOut});
        out.push_back({s1, 0, Action::LineIn});
        break;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Action& a, const Action& b) {
    return a.step != b.step ? a.step < b.step : a.order < b.order;
  });
  return out;
}

void apply(const Action& a, SimState& s) {
  switch (a.kind) {
    case Action::FaultOn: s.fault_on = true; break;
    case Action::FaultOff: s.fault_on = false; break;
    case Action::LineOut: s.lines_in_service = std::max(1, s.lines_in_service - 1); break;
    case Action::LineIn: s.lines_in_service = std::min(2, s.lines_in_service + 1); break;
    case Action::SetVref: s.V_ref = a.value; break;
  }
}

}  // namespace

// ---------------------------------------------------------------- parameters

double MachineParams::T_d0_p() const { return short_circuit_constants ? T_d_p * X_d / X_d_p : T_d_p; }
double MachineParams::T_q0_p() const { return short_circuit_constants ? T_q_p * X_q / X_q_p : T_q_p; }
double MachineParams::T_d0_pp() const {
  return short_circuit_constants ? T_d_pp * X_d_p / X_d_pp : T_d_pp;
}
double MachineParams::T_q0_pp() const {
  return short_circuit_constants ? T_q_pp * X_q_p / X_q_pp : T_q_pp;
}
double MachineParams::omega_base() const { return 2.0 * std::numbers::pi * f_nom; }

void MachineParams::validate() const {
  require(X_d > X_d_p && X_d_p > X_d_pp && X_d_pp > 0, "require X_d > X_d' > X_d'' > 0");
  require(X_q > X_q_p && X_q_p > X_q_pp && X_q_pp > 0, "require X_q > X_q' > X_q'' > 0");
  require(T_d_p > 0 && T_d_pp > 0 && T_q_pp > 0 && T_q_p > 0, "time constants must be positive");
  require(H > 0, "inertia constant must be positive");
  require(R_stator >= 0 && D >= 0, "R_stator and D must be non-negative");
  require(f_nom > 0 && S_base > 0 && V_base > 0 && X_s > 0, "base quantities must be positive");
  require(model_order == 4 || model_order == 6, "model_order must be 4 or 6");
}

void ExciterParams::validate() const {
  require(Ta > 0 && Te > 0 && Tf > 0, "exciter time constants must be positive");
  require(Ke > 0, "exciter gain Ke must be positive");
  require(Vf_min < Vf_max, "require Vf_min < Vf_max");
}

void NetworkParams::validate() const {
  require(V_infinite_bus > 0, "infinite bus voltage must be positive");
  require(fault_impedance > 0, "fault impedance must be positive");
  for (const auto& z : line_impedances) require(std::abs(z) > 0, "line impedance must be non-zero");
}

double DisturbanceEvent::t_end() const {
  switch (kind) {
    case DisturbanceKind::VrefStep:
    case DisturbanceKind::LineTrip:
      return t_start;
    default:
      return t_start + duration;
  }
}

std::string_view to_string(DisturbanceKind kind) {
  switch (kind) {
    case DisturbanceKind::VrefStep: return "VREF_STEP";
    case DisturbanceKind::TerminalFaultSelfClearing: return "TERMINAL_FAULT_SELF_CLEARING";
    case DisturbanceKind::TerminalFaultClearedByTrip: return "TERMINAL_FAULT_CLEARED_BY_TRIP";
    case DisturbanceKind::LineTrip: return "LINE_TRIP";
    case DisturbanceKind::LineReclose: return "LINE_RECLOSE";
  }
  return "?";
}

DisturbanceKind parse_disturbance_kind(std::string_view text) {
  for (auto k : {DisturbanceKind::VrefStep, DisturbanceKind::TerminalFaultSelfClearing,
                 DisturbanceKind::TerminalFaultClearedByTrip, DisturbanceKind::LineTrip,
                 DisturbanceKind::LineReclose})
    if (to_string(k) == text) return k;
  throw Error(ErrorCode::Parse, "unknown disturbance kind '" + std::string(text) + "'");
}

// ------------------------------------------------------------------ physics

double power_angle_p(double E_f, double V_T, double X_s, double delta) {
  return E_f * V_T / X_s * std::sin(delta);
}

SimState init_steady_state(const PlantParams& p, double P_target, double V_T_target) {
  p.machine.validate();
  p.exciter.validate();
  p.network.validate();
  require(V_T_target >= 0.8 && V_T_target <= 1.2, "V_T_target must lie in [0.8, 1.2]");
  const auto& m = p.machine;
  const auto& ex = p.exciter;

  // Terminal voltage angle theta such that the terminal delivers P_target.
  const cplx z = external_impedance(p.network, m, 2);
  const cplx v_inf{p.network.V_infinite_bus, 0.0};
  const auto power = [&](double theta) {
    const cplx v = std::polar(V_T_target, theta);
    return (v * std::conj((v - v_inf) / z)).real();
  };
  const auto dpower = [&](double theta) {
    const cplx v = std::polar(V_T_target, theta);
    const cplx i = (v - v_inf) / z;
    const cplx dv = cplx{0, 1} * v;
    return (dv * std::conj(i) + v * std::conj(dv / z)).real();
  };

  double theta = 0.0;
  bool converged = false;
  for (int it = 0; it < kMaxEquilibriumIterations; ++it) {
    const double f = power(theta) - P_target;
    if (std::abs(f) <= 1e-14) {
      converged = true;
      break;
    }
    const double df = dpower(theta);
    if (!(df > 0)) break;  // past the transfer limit
    theta -= f / df;
    if (!(std::abs(theta) < std::numbers::pi / 2)) break;
  }
  if (!converged)
    throw Error(ErrorCode::NoEquilibrium,
                "no operating point delivers P=" + std::to_string(P_target) +
                    " at V_T=" + std::to_string(V_T_target));

  const cplx v = std::polar(V_T_target, theta);
  const cplx i = (v - v_inf) / z;
  const cplx e_q = v + cplx{m.R_stator, m.X_q} * i;

  SimState s;
  s.x[kRotorAngle] = std::arg(e_q);
  s.x[kOmega] = 1.0;
  const cplx v_dq = to_dq(v, s.x[kRotorAngle]);
  const cplx i_dq = to_dq(i, s.x[kRotorAngle]);
  const double vd = v_dq.real(), vq = v_dq.imag();
  const double id = i_dq.real(), iq = i_dq.imag();
  const double ra = m.R_stator;

  const double edp = (m.X_q - m.X_q_p) * iq;
  double eqp, efd;
  if (m.model_order == 6) {
    s.x[kEdPP] = vd + ra * id - m.X_q_pp * iq;
    s.x[kEqPP] = vq + ra * iq + m.X_d_pp * id;
    eqp = s.x[kEqPP] + (m.X_d_p - m.X_d_pp) * id;
  } else {
    eqp = vq + ra * iq + m.X_d_p * id;
  }
  efd = eqp + (m.X_d - m.X_d_p) * id;
  s.x[kEdP] = edp;
  s.x[kEqP] = eqp;
  if (m.model_order == 4) {
    s.x[kEdPP] = edp;
    s.x[kEqPP] = eqp;
  }
  s.x[kEfd] = efd;
  s.x[kVr] = ex.Ke * efd;
  s.x[kVfbLag] = efd;
  if (s.x[kVr] < ex.Vf_min || s.x[kVr] > ex.Vf_max)
    throw Error(ErrorCode::NoEquilibrium, "required regulator output exceeds the ceiling");
  // The reference is the terminal voltage setpoint; the regulator carries the
  // bias that holds the initial field voltage at zero voltage error.
  s.V_ref = V_T_target;
  s.Vr_bias = s.x[kVr];
  s.P_mech = (vd + ra * id) * id + (vq + ra * iq) * iq;
  return s;
}

SimSignals signals(const SimState& s, const PlantParams& p) {
  const Stator st = solve_stator(s, p);
  SimSignals out;
  out.t = s.t;
  out.V_d = st.vd;
  out.V_q = st.vq;
  out.V_T = std::hypot(st.vd, st.vq);
  out.omega = s.x[kOmega];
  out.delta = std::atan2(st.vd, st.vq);
  out.P = st.vd * st.id + st.vq * st.iq;
  out.Q = st.vq * st.id - st.vd * st.iq;
  out.V_f = s.x[kEfd];
  // EMF behind X_q: lies on the q-axis in steady state.
  out.E_f = st.vq + p.machine.R_stator * st.iq + p.machine.X_q * st.id;
  return out;
}

std::array<double, kStateCount> derivatives(const SimState& s, const PlantParams& p) {
  const auto& m = p.machine;
  const auto& ex = p.exciter;
  const Stator st = solve_stator(s, p);
  const auto& x = s.x;
  const double ra = m.R_stator;
  std::array<double, kStateCount> dx{};

  const double pe = (st.vq + ra * st.iq) * st.iq + (st.vd + ra * st.id) * st.id;
  dx[kRotorAngle] = m.omega_base() * (x[kOmega] - 1.0);
  dx[kOmega] = (s.P_mech - pe - m.D * (x[kOmega] - 1.0)) / (2.0 * m.H);
  dx[kEqP] = (-x[kEqP] - (m.X_d - m.X_d_p) * st.id + x[kEfd]) / m.T_d0_p();
  dx[kEdP] = (-x[kEdP] + (m.X_q - m.X_q_p) * st.iq) / m.T_q0_p();
  if (m.model_order == 6) {
    dx[kEqPP] = (-x[kEqPP] + x[kEqP] - (m.X_d_p - m.X_d_pp) * st.id) / m.T_d0_pp();
    dx[kEdPP] = (-x[kEdPP] + x[kEdP] + (m.X_q_p - m.X_q_pp) * st.iq) / m.T_q0_pp();
  } else {
    dx[kEqPP] = dx[kEqP];
    dx[kEdPP] = dx[kEdP];
  }

  const double v_t = std::hypot(st.vd, st.vq);
  const double v_fb = ex.Kf * (x[kEfd] - x[kVfbLag]) / ex.Tf;
  double dvr = (ex.Ka * (s.V_ref - v_t - v_fb) + s.Vr_bias - x[kVr]) / ex.Ta;
  if ((x[kVr] >= ex.Vf_max && dvr > 0) || (x[kVr] <= ex.Vf_min && dvr < 0)) dvr = 0;
  dx[kVr] = dvr;
  dx[kEfd] = (x[kVr] - ex.Ke * x[kEfd]) / ex.Te;
  dx[kVfbLag] = (x[kEfd] - x[kVfbLag]) / ex.Tf;
  return dx;
}

SimState step(const SimState& s, const PlantParams& p, double h) {
  require(h > 0 && h <= p.exciter.Ta / 5 * (1 + 1e-12), "step size must satisfy 0 < h <= Ta/5");
  const auto stage = [&](const SimState& base, const std::array<double, kStateCount>& k,
                         double scale) {
    SimState out = base;
    for (std::size_t i = 0; i < kStateCount; ++i) out.x[i] += scale * k[i];
    return out;
  };
  const auto k1 = derivatives(s, p);
  const auto k2 = derivatives(stage(s, k1, h / 2), p);
  const auto k3 = derivatives(stage(s, k2, h / 2), p);
  const auto k4 = derivatives(stage(s, k3, h), p);
  SimState out = s;
  for (std::size_t i = 0; i < kStateCount; ++i)
    out.x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  out.x[kVr] = std::clamp(out.x[kVr], p.exciter.Vf_min, p.exciter.Vf_max);
  out.t = s.t + h;
  for (double v : out.x)
    if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit)
      throw Error(ErrorCode::NumericDivergence,
                  "state magnitude exceeded limit at t=" + std::to_string(out.t));
  return out;
}

// ---------------------------------------------------------------- scenarios

std::string_view scenario_class(std::string_view scenario_id) {
  return scenario_id.substr(0, scenario_id.find('/'));
}

SimTrace run_scenario(const PlantParams& plant, const Scenario& sc) {
  require(sc.dt_sample > 0 && sc.t_end > sc.dt_sample, "invalid sampling window");
  require(sc.h > 0, "integration step must be positive");
  validate_events(sc);

  const long long substeps = std::max<long long>(1, std::llround(std::ceil(sc.dt_sample / sc.h - 1e-9)));
  const double h = sc.dt_sample / static_cast<double>(substeps);
  const long long samples = std::llround(sc.t_end / sc.dt_sample);

  SimState state = init_steady_state(plant, sc.op.P_target, sc.op.V_T_target);
  SimTrace trace;
  trace.scenario_id = sc.id;
  trace.dt_sample = sc.dt_sample;
  trace.V_ref = state.V_ref;
  trace.signals.reserve(static_cast<std::size_t>(samples));

  const auto actions = schedule(sc, h, state.V_ref);
  std::size_t next_action = 0;
  double above_pi_since = -1;

  const long long total = samples * substeps;
  for (long long k = 0; k < total; ++k) {
    while (next_action < actions.size() && actions[next_action].step <= k)
      apply(actions[next_action++], state);
    state.t = static_cast<double>(k) * h;
    if (k % substeps == 0) {
      SimSignals sig = signals(state, plant);
      sig.t = static_cast<double>(k / substeps) * sc.dt_sample;
      trace.signals.push_back(sig);
    }
    try {
      state = step(state, plant, h);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NumericDivergence)
        throw Error(ErrorCode::NumericDivergence,
                    sc.id + ": state diverged at t=" + std::to_string(state.t + h));
      throw;
    }
    if (state.x[kRotorAngle] > std::numbers::pi) {
      if (above_pi_since < 0) above_pi_since = state.t;
      if (state.t - above_pi_since >= kUnstableHold)
        throw Error(ErrorCode::UnstableScenario,
                    sc.id + ": loss of synchronism, rotor angle past pi since t=" +
                        std::to_string(above_pi_since));
    } else {
      above_pi_since = -1;
    }
  }
  return trace;
}

std::vector<SimTrace> run_scenarios(const PlantParams& plant, std::span<const Scenario> scenarios,
                                    Execution exec) {
  std::vector<SimTrace> out(scenarios.size());
  std::vector<std::string> errors(scenarios.size());
  std::vector<int> codes(scenarios.size(), -1);
  const auto body = [&](std::ptrdiff_t i) {
    try {
      out[i] = run_scenario(plant, scenarios[i]);
    } catch (const Error& e) {
      codes[i] = static_cast<int>(e.code());
      errors[i] = e.what();
    } catch (const std::exception& e) {
      codes[i] = static_cast<int>(ErrorCode::InvalidArgument);
      errors[i] = e.what();
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(scenarios.size());
  if (exec == Execution::Parallel) {
#ifdef EXFL_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
  }
  for (std::size_t i = 0; i < codes.size(); ++i)
    if (codes[i] >= 0) {
      // Strip the "CODE: " prefix the nested error already carries.
      std::string msg = errors[i];
      if (const auto pos = msg.find(": "); pos != std::string::npos) msg = msg.substr(pos + 2);
      throw Error(static_cast<ErrorCode>(codes[i]), msg);
    }
  return out;
}

std::vector<Scenario> default_scenarios(const OperatingPoint& op) {
  using K = DisturbanceKind;
  const auto make = [&](std::string id, DisturbanceEvent ev) {
    Scenario sc;
    sc.id = std::move(id);
    sc.op = op;
    sc.events = {ev};
    return sc;
  };
  return {
      make("VREF_STEP/+10%", {K::VrefStep, 1.0, 0.0, +0.10}),
      make("VREF_STEP/-10%", {K::VrefStep, 1.0, 0.0, -0.10}),
      make("TERMINAL_FAULT_SELF_CLEARING/120ms", {K::TerminalFaultSelfClearing, 1.0, 0.120, 0}),
      make("TERMINAL_FAULT_CLEARED_BY_TRIP/120ms", {K::TerminalFaultClearedByTrip, 1.0, 0.120, 0}),
      make("LINE_TRIP/1", {K::LineTrip, 1.0, 0.0, 0}),
      make("LINE_RECLOSE/1s", {K::LineReclose, 1.0, 1.0, 0}),
  };
}

// ---------------------------------------------------------------------- csv

namespace {
constexpr std::string_view kTraceHeader = "t,Vt,Vd,Vq,omega,delta,P,Q,Vf,Ef,scenario_id";
}

void write_traces_csv(std::ostream& os, std::span<const SimTrace> traces) {
  os << kTraceHeader << '\n';
  for (const auto& tr : traces)
    for (const auto& s : tr.signals)
      os << csv::fmt(s.t) << ',' << csv::fmt(s.V_T) << ',' << csv::fmt(s.V_d) << ','
         << csv::fmt(s.V_q) << ',' << csv::fmt(s.omega) << ',' << csv::fmt(s.delta) << ','
         << csv::fmt(s.P) << ',' << csv::fmt(s.Q) << ',' << csv::fmt(s.V_f) << ','
         << csv::fmt(s.E_f) << ',' << tr.scenario_id << '\n';
}

std::vector<SimTrace> read_traces_csv(std::istream& is) {
  csv::Reader reader(is, kTraceHeader);
  std::vector<SimTrace> traces;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (traces.empty() || traces.back().scenario_id != f[10]) {
      traces.emplace_back();
      traces.back().scenario_id = std::string(f[10]);
    }
    SimSignals s;
    s.t = csv::parse_double(f[0]);
    s.V_T = csv::parse_double(f[1]);
    s.V_d = csv::parse_double(f[2]);
    s.V_q = csv::parse_double(f[3]);
    s.omega = csv::parse_double(f[4]);
    s.delta = csv::parse_double(f[5]);
    s.P = csv::parse_double(f[6]);
    s.Q = csv::parse_double(f[7]);
    s.V_f = csv::parse_double(f[8]);
    s.E_f = csv::parse_double(f[9]);
    traces.back().signals.push_back(s);
  }
  for (auto& tr : traces)
    if (tr.signals.size() >= 2) tr.dt_sample = tr.signals[1].t - tr.signals[0].t;
  return traces;
}

}  // namespace exfl::smib
