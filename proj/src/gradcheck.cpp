#include "bcf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bcf {

namespace {

struct Slot {
  double* value;
  double grad;
  double step;
};

}  // namespace

GradCheckResult check_gradients(const Model& model, const MaterialStack& stack, const Batch& batch, int samples,
                                std::uint64_t seed, double tolerance, double floor) {
  Model work = model;
  ModelGrad grad = ModelGrad::zeros_like(model);
  backprop_batch(model, stack, batch, grad);

  std::vector<Slot> slots;
  for (std::size_t l = 0; l < work.layers.size(); ++l) {
    const bool blocks = work.layers[l].storage() == FeaturePyramid::Storage::Block;
    const auto values = work.layers[l].parameters();
    const auto grads = grad.layers[l].parameters();
    for (std::size_t k = 0; k < values.size(); ++k) {
      // Block spans alternate endpoints, alphas per mip.
      const double step = blocks && k % 2 == 0 ? 1e-4 : 1e-6;
      for (std::size_t i = 0; i < values[k].size(); ++i) slots.push_back({&values[k][i], grads[k][i], step});
    }
  }
  {
    const auto values = work.mlp.parameters();
    const auto grads = grad.mlp.parameters();
    for (std::size_t k = 0; k < values.size(); ++k)
      for (std::size_t i = 0; i < values[k].size(); ++i) slots.push_back({&values[k][i], grads[k][i], 1e-6});
  }

  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(order.size(), std::size_t(std::max(samples, 0))));

  const double base = loss_batch(work, stack, batch);
  GradCheckResult r;
  for (std::size_t idx : order) {
    Slot& s = slots[idx];
    const double x = *s.value;
    *s.value = x + s.step;
    const double plus = loss_batch(work, stack, batch);
    *s.value = x - s.step;
    const double minus = loss_batch(work, stack, batch);
    *s.value = x;

    const double central = (plus - minus) / (2.0 * s.step);
    const double scale = std::max(std::abs(central), std::abs(s.grad));
    const double rel = scale < floor ? 0.0 : std::abs(central - s.grad) / scale;
    ++r.checked;
    r.worst_relative_error = std::max(r.worst_relative_error, rel);
    if (rel < tolerance) {
      ++r.passed;
      continue;
    }
    const double fwd = (plus - base) / s.step, bwd = (base - minus) / s.step;
    if (std::abs(fwd - bwd) > tolerance * std::max({std::abs(fwd), std::abs(bwd), floor})) ++r.kinks;
  }
  return r;
}

}  // namespace bcf
