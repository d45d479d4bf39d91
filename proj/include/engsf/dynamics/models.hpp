#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "engsf/core/ensemble.hpp"
#include "engsf/core/rng.hpp"
#include "engsf/core/vec.hpp"

namespace engsf {

enum class Integrator {
  Rk4,            // classical 4th-order Runge-Kutta on the drift
  EulerMaruyama,  // x + dt f(x)
  DiscreteMap,    // x_{k+1} = f(x_k); dt is ignored and one step is one unit
};

// For Rk4/EulerMaruyama the callback evaluates the drift dx/dt = f(x); for
// DiscreteMap it evaluates the next state directly.
using DriftFn = std::function<void(std::span<const double>, std::span<double>)>;

// A discrete-time stochastic model: a deterministic update followed by
// additive Gaussian noise with per-component standard deviation
// noise_std[i] * sqrt(dt) (noise_std[i] alone for DiscreteMap). An empty
// noise_std means the model is deterministic.
struct DynamicsModel {
  std::size_t dim = 0;
  Integrator integrator = Integrator::Rk4;
  double dt = 0.0;
  DriftFn drift;
  Vec noise_std;

  // One step in place; throws NonFiniteState when a component leaves the
  // finite range.
  void step(std::span<double> x, RngStream& rng) const;
  void step_deterministic(std::span<const double> x, std::span<double> out) const;
};

// One classical RK4 step; throws NonFiniteState on a non-finite result.
Vec rk4_step(const DriftFn& f, std::span<const double> x, double dt);

// du = (4u - 4u^3) dt + kappa dW: bistable double-well with wells at +-1.
DynamicsModel make_double_well(double kappa, double dt);

struct Lorenz63Params {
  double gamma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

// Three-variable convective system; noise_var holds the per-unit-time model
// error variance of each component.
DynamicsModel make_lorenz63(const Lorenz63Params& params, double dt,
                            const Vec& noise_var);

// Cyclic 40-variable-style system dx_j/dt = (x_{j+1} - x_{j-2}) x_{j-1} - x_j
// + forcing, with a common per-unit-time model error variance.
DynamicsModel make_lorenz95(std::size_t dim, double forcing, double dt,
                            double noise_var);

// Linear map x -> A x plus noise, one unit per step; the exactly solvable
// reference case.
DynamicsModel make_linear_map(const Matrix& a, const Vec& noise_std);

// A simulated truth run plus the observations taken from it. states has one
// row per recorded time (row 0 is the post-spinup initial condition), and
// observation k was taken at step index obs_steps[k].
struct TrajectoryRecord {
  Vec times;
  Matrix states;
  std::vector<std::size_t> obs_steps;
  std::vector<Vec> observations;
};

// Integrates spinup_steps unrecorded steps from x0, then `steps` recorded
// steps, observing y = H x + e every obs_interval steps (first observation
// after one full interval). Process noise uses rng sub-stream "process",
// observation noise "obs".
TrajectoryRecord simulate_truth(const DynamicsModel& model, const Vec& x0,
                                std::size_t steps, std::size_t spinup_steps,
                                const ObservationOp& obs,
                                std::size_t obs_interval, RngStream& rng);

}  // namespace engsf
