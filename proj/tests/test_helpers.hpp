#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "airkrig/rng.hpp"
#include "airkrig/tensor.hpp"

namespace airkrig::test {

/// Central finite differences of a scalar function over a parameter buffer.
/// Perturbs every element of every parameter at eps and compares against the
/// analytic gradients already accumulated in the params. Returns the maximum
/// relative error, with small entries measured against `floor`.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    int worst_index = -1;
};

template <typename Real>
GradCheckResult finite_difference_check(std::vector<ParamT<Real>*> params,
                                        const std::function<double()>& loss_fn, double eps,
                                        double floor) {
    GradCheckResult result;
    for (ParamT<Real>* p : params) {
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const Real saved = p->value[k];
            p->value[k] = saved + static_cast<Real>(eps);
            const double up = loss_fn();
            p->value[k] = saved - static_cast<Real>(eps);
            const double down = loss_fn();
            p->value[k] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double an = static_cast<double>(p->grad[k]);
            const double denom = std::max({std::abs(fd), std::abs(an), floor});
            const double rel = std::abs(fd - an) / denom;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_param = p->name;
                result.worst_index = static_cast<int>(k);
            }
        }
    }
    return result;
}

inline std::vector<double> random_vector(airkrig::Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_uniform(lo, hi);
    return v;
}

}  // namespace airkrig::test
