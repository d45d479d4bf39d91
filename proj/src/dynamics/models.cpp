#include "engsf/dynamics/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "engsf/core/error.hpp"
#include "engsf/core/stats.hpp"
#include "engsf/simd/kernels.hpp"

namespace engsf {

namespace {

void check_finite(std::span<const double> x, const char* what) {
  if (!all_finite(x)) {
    throw NonFiniteState(std::string(what) + " produced a non-finite state");
  }
}

}  // namespace

Vec rk4_step(const DriftFn& f, std::span<const double> x, double dt) {
  const std::size_t m = x.size();
  Vec k1(m), k2(m), k3(m), k4(m), stage(m), out(m);
  f(x, k1);
  simd::add_scaled(x.data(), 0.5 * dt, k1.data(), stage.data(), m);
  f(stage, k2);
  simd::add_scaled(x.data(), 0.5 * dt, k2.data(), stage.data(), m);
  f(stage, k3);
  simd::add_scaled(x.data(), dt, k3.data(), stage.data(), m);
  f(stage, k4);
  simd::rk4_combine(x.data(), k1.data(), k2.data(), k3.data(), k4.data(), dt,
                    out.data(), m);
  check_finite(out, "rk4_step");
  return out;
}

void DynamicsModel::step_deterministic(std::span<const double> x,
                                       std::span<double> out) const {
  switch (integrator) {
    case Integrator::Rk4: {
      const Vec y = rk4_step(drift, x, dt);
      std::copy(y.begin(), y.end(), out.begin());
      return;
    }
    case Integrator::EulerMaruyama: {
      Vec k(dim);
      drift(x, k);
      simd::add_scaled(x.data(), dt, k.data(), out.data(), dim);
      return;
    }
    case Integrator::DiscreteMap: {
      Vec y(dim);
      drift(x, y);
      std::copy(y.begin(), y.end(), out.begin());
      return;
    }
  }
}

void DynamicsModel::step(std::span<double> x, RngStream& rng) const {
  Vec next(dim);
  step_deterministic(x, next);
  if (!noise_std.empty()) {
    const double root_dt =
        integrator == Integrator::DiscreteMap ? 1.0 : std::sqrt(dt);
    for (std::size_t i = 0; i < dim; ++i) {
      next[i] += noise_std[i] * root_dt * rng.normal();
    }
  }
  check_finite(next, "model step");
  std::copy(next.begin(), next.end(), x.begin());
}

DynamicsModel make_double_well(double kappa, double dt) {
  DynamicsModel m;
  m.dim = 1;
  m.integrator = Integrator::EulerMaruyama;
  m.dt = dt;
  m.drift = [](std::span<const double> x, std::span<double> out) {
    out[0] = 4.0 * x[0] - 4.0 * x[0] * x[0] * x[0];
  };
  m.noise_std = {kappa};
  return m;
}

DynamicsModel make_lorenz63(const Lorenz63Params& params, double dt,
                            const Vec& noise_var) {
  if (noise_var.size() != 3) {
    throw LengthMismatch("lorenz63 expects 3 noise variances");
  }
  DynamicsModel m;
  m.dim = 3;
  m.integrator = Integrator::Rk4;
  m.dt = dt;
  m.drift = [params](std::span<const double> x, std::span<double> out) {
    out[0] = params.gamma * (x[1] - x[0]);
    out[1] = params.rho * x[0] - x[1] - x[0] * x[2];
    out[2] = x[0] * x[1] - params.beta * x[2];
  };
  m.noise_std = {std::sqrt(noise_var[0]), std::sqrt(noise_var[1]),
                 std::sqrt(noise_var[2])};
  return m;
}

DynamicsModel make_lorenz95(std::size_t dim, double forcing, double dt,
                            double noise_var) {
  if (dim < 4) throw Error("lorenz95 needs at least 4 components");
  DynamicsModel m;
  m.dim = dim;
  m.integrator = Integrator::Rk4;
  m.dt = dt;
  m.drift = [forcing](std::span<const double> x, std::span<double> out) {
    simd::lorenz95_drift(x.data(), x.size(), forcing, out.data());
  };
  m.noise_std = Vec(dim, std::sqrt(noise_var));
  return m;
}

DynamicsModel make_linear_map(const Matrix& a, const Vec& noise_std) {
  if (a.rows() != a.cols()) throw Error("linear map matrix must be square");
  if (!noise_std.empty() && noise_std.size() != a.rows()) {
    throw LengthMismatch("linear map noise has wrong dimension");
  }
  DynamicsModel m;
  m.dim = a.rows();
  m.integrator = Integrator::DiscreteMap;
  m.dt = 1.0;
  m.drift = [a](std::span<const double> x, std::span<double> out) {
    const Vec y = matvec(a, x);
    std::copy(y.begin(), y.end(), out.begin());
  };
  m.noise_std = noise_std;
  return m;
}

TrajectoryRecord simulate_truth(const DynamicsModel& model, const Vec& x0,
                                std::size_t steps, std::size_t spinup_steps,
                                const ObservationOp& obs,
                                std::size_t obs_interval, RngStream& rng) {
  if (x0.size() != model.dim) {
    throw LengthMismatch("simulate_truth: initial condition has dimension " +
                         std::to_string(x0.size()) + ", model has " +
                         std::to_string(model.dim));
  }
  obs.validate(model.dim);
  if (obs_interval == 0) throw Error("simulate_truth: obs_interval must be >= 1");

  RngStream process = rng.sub("process");
  RngStream obs_rng = rng.sub("obs");

  Vec x = x0;
  for (std::size_t k = 0; k < spinup_steps; ++k) model.step(x, process);

  TrajectoryRecord rec;
  rec.times.resize(steps + 1);
  rec.states = Matrix(steps + 1, model.dim);
  const double step_dt = model.integrator == Integrator::DiscreteMap ? 1.0 : model.dt;
  auto record = [&](std::size_t k) {
    rec.times[k] = static_cast<double>(k) * step_dt;
    std::copy(x.begin(), x.end(), rec.states.row(k));
  };
  record(0);
  for (std::size_t k = 1; k <= steps; ++k) {
    model.step(x, process);
    record(k);
    if (k % obs_interval == 0) {
      const Vec clean = observe(obs, x);
      const Matrix noisy = sample_mvn(clean, obs.R, 1, obs_rng);
      Vec y(obs.obs_dim());
      for (std::size_t r = 0; r < y.size(); ++r) y[r] = noisy(r, 0);
      rec.obs_steps.push_back(k);
      rec.observations.push_back(std::move(y));
    }
  }
  return rec;
}

}  // namespace engsf
