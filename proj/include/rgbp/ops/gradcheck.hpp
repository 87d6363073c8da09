#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rgbp/rng.hpp"
#include "rgbp/tensor.hpp"

namespace rgbp::ops {

// Verification harness: analytic VJP vs central finite differences at
// 64-bit. A check passes iff the max over every input and parameter
// coordinate of |a - n| / max(1, |a|, |n|) stays below tol.

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = true;
    std::size_t worst_coord = 0;
    std::string name;
};

// A differentiable map of one flat coordinate vector (inputs and
// parameters packed together by the caller).
struct FlatFn {
    std::function<std::vector<double>(const std::vector<double>&)> forward;
    // gradient of <cotangent, forward(theta)> with respect to theta
    std::function<std::vector<double>(const std::vector<double>&,
                                      const std::vector<double>&)> vjp;
};

// `stride` > 1 probes every stride-th coordinate; large composites use it
// to keep the finite-difference sweep affordable.
inline GradCheckReport grad_check(const std::string& name, const FlatFn& fn,
                                  const std::vector<double>& theta,
                                  std::uint64_t seed, double h = 1e-5,
                                  double tol = 1e-5, std::size_t stride = 1) {
    GradCheckReport rep;
    rep.name = name;

    const std::vector<double> y0 = fn.forward(theta);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> cotangent(y0.size());
    for (auto& v : cotangent) v = rng.uniform(-1.0, 1.0);

    const std::vector<double> analytic = fn.vjp(theta, cotangent);
    if (analytic.size() != theta.size())
        throw std::logic_error("grad_check: vjp size mismatch for " + name);

    std::vector<double> probe = theta;
    for (std::size_t i = 0; i < theta.size(); i += stride) {
        probe[i] = theta[i] + h;
        const std::vector<double> yp = fn.forward(probe);
        probe[i] = theta[i] - h;
        const std::vector<double> ym = fn.forward(probe);
        probe[i] = theta[i];
        double lp = 0.0, lm = 0.0;
        for (std::size_t j = 0; j < y0.size(); ++j) {
            lp += cotangent[j] * yp[j];
            lm += cotangent[j] * ym[j];
        }
        const double numeric = (lp - lm) / (2.0 * h);
        const double a = analytic[i];
        const double rel =
            std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_coord = i;
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

// Packs a fixed list of tensors/vectors into one flat coordinate vector
// and back. Registration order defines the layout.
template <typename T>
class FlatPacker {
public:
    void add(Tensor<T>& t) { tensors_.push_back(&t); }
    void add(std::vector<T>& v) {
        if (!v.empty()) vectors_.push_back(&v);
    }

    std::size_t dim() const {
        std::size_t d = 0;
        for (const auto* t : tensors_) d += t->size();
        for (const auto* v : vectors_) d += v->size();
        return d;
    }

    std::vector<double> pack() const {
        std::vector<double> flat;
        flat.reserve(dim());
        for (const auto* t : tensors_)
            for (std::size_t i = 0; i < t->size(); ++i)
                flat.push_back(static_cast<double>((*t)[i]));
        for (const auto* v : vectors_)
            for (const auto& x : *v) flat.push_back(static_cast<double>(x));
        return flat;
    }

    void unpack(const std::vector<double>& flat) {
        std::size_t k = 0;
        for (auto* t : tensors_)
            for (std::size_t i = 0; i < t->size(); ++i)
                (*t)[i] = static_cast<T>(flat[k++]);
        for (auto* v : vectors_)
            for (auto& x : *v) x = static_cast<T>(flat[k++]);
        if (k != flat.size())
            throw std::logic_error("FlatPacker: size mismatch on unpack");
    }

private:
    std::vector<Tensor<T>*> tensors_;
    std::vector<std::vector<T>*> vectors_;
};

} // namespace rgbp::ops
