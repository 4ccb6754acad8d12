#pragma once

// Shared test helpers: finite-difference gradient oracle and random tensors.

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eegx/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale < 1e-8) return 0.0;  // both effectively zero
  return std::abs(a - b) / scale;
}

inline eegx::Tensor random_leaf(eegx::Shape shape, std::mt19937_64& rng,
                                double spread = 1.0) {
  std::normal_distribution<double> dist(0.0, spread);
  std::vector<eegx::real> d(eegx::shape_numel(shape));
  for (auto& v : d) v = static_cast<eegx::real>(dist(rng));
  return eegx::Tensor::leaf(std::move(shape), std::move(d));
}

inline eegx::Tensor random_const(eegx::Shape shape, std::mt19937_64& rng,
                                 double spread = 1.0) {
  std::normal_distribution<double> dist(0.0, spread);
  std::vector<eegx::real> d(eegx::shape_numel(shape));
  for (auto& v : d) v = static_cast<eegx::real>(dist(rng));
  return eegx::Tensor::constant(std::move(shape), std::move(d));
}

// Central finite differences against reverse-mode gradients for every
// element of every listed parameter. `f` rebuilds the graph from the
// parameters' current data on each call.
inline bool gradcheck(const std::function<eegx::Tensor()>& f,
                      std::vector<eegx::Tensor*> params, double tol = 1e-4,
                      double h = 1e-5, std::string* message = nullptr) {
  for (auto* p : params) p->zero_grad();
  eegx::Tensor loss = f();
  eegx::backward(loss);
  std::vector<std::vector<eegx::real>> analytic;
  for (auto* p : params) {
    if (p->has_grad())
      analytic.push_back(p->grad());
    else
      analytic.emplace_back(p->size(), eegx::real(0));
    p->zero_grad();
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi]->mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const eegx::real keep = data[j];
      data[j] = keep + static_cast<eegx::real>(h);
      const double fp = f().item();
      data[j] = keep - static_cast<eegx::real>(h);
      const double fm = f().item();
      data[j] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[pi][j];
      const double err = rel_err(an, fd);
      if (err > tol && std::abs(an - fd) > 1e-7) {
        if (message) {
          std::ostringstream os;
          os << "param " << pi << " elem " << j << ": analytic " << an
             << " vs fd " << fd << " (rel err " << err << ")";
          *message = os.str();
        }
        return false;
      }
    }
  }
  return true;
}

}  // namespace testutil
