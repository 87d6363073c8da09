#pragma once

#include <cmath>

#include "rgbp/tensor.hpp"

namespace rgbp {

// Linear-polarization math for four-direction intensity measurements.
//
// Conventions (documented, applied uniformly):
//  - AoLP phi is in radians, remapped into [0, pi); it is pi-periodic.
//  - DoLP rho is clamped into [0, 1].
//  - Degenerate pixels (s0 or polarized magnitude below kEpsS0) get
//    rho = 0 / phi = 0 so outputs stay reproducible.

inline constexpr double kEpsS0 = 1e-8;
inline constexpr double kPi = 3.14159265358979323846;

// Pixel-aligned intensity planes at 0/45/90/135 degrees. Planes are
// (1, C, H, W) with C in {1, 3}.
template <typename T>
struct QuadIntensities {
    Tensor<T> i0, i45, i90, i135;

    void validate() const {
        require_same_shape(i0, i45, "QuadIntensities");
        require_same_shape(i0, i90, "QuadIntensities");
        require_same_shape(i0, i135, "QuadIntensities");
        require_finite(i0, "QuadIntensities.i0");
        require_finite(i45, "QuadIntensities.i45");
        require_finite(i90, "QuadIntensities.i90");
        require_finite(i135, "QuadIntensities.i135");
    }
};

// Per-pixel, per-channel Stokes planes (linear components only).
template <typename T>
struct StokesImage {
    Tensor<T> s0, s1, s2;

    void validate() const {
        require_same_shape(s0, s1, "StokesImage");
        require_same_shape(s0, s2, "StokesImage");
        require_finite(s0, "StokesImage.s0");
        require_finite(s1, "StokesImage.s1");
        require_finite(s2, "StokesImage.s2");
    }
};

// AoLP (radians, [0, pi)) and DoLP ([0, 1]) planes.
template <typename T>
struct PolarMaps {
    Tensor<T> aolp, dolp;
};

// s0 averages the two redundant estimates (i0+i90 and i45+i135); sensor
// noise breaks their equality and the mean is unbiased under symmetric
// noise. consistency_residual exposes the discrepancy.
template <typename T>
StokesImage<T> compute_stokes(const QuadIntensities<T>& quad) {
    quad.validate();
    StokesImage<T> out;
    out.s0 = quad.i0.zeros_like();
    out.s1 = quad.i0.zeros_like();
    out.s2 = quad.i0.zeros_like();
    for (std::size_t i = 0; i < quad.i0.size(); ++i) {
        out.s0[i] = (quad.i0[i] + quad.i90[i] + quad.i45[i] + quad.i135[i]) / T(2);
        out.s1[i] = quad.i0[i] - quad.i90[i];
        out.s2[i] = quad.i45[i] - quad.i135[i];
    }
    return out;
}

// phi = atan2(s2, s1) / 2 remapped into [0, pi); rho = sqrt(s1^2+s2^2)/s0
// clamped into [0, 1]. Robust against arbitrary (noisy, inconsistent)
// input: the output ranges always hold.
template <typename T>
PolarMaps<T> compute_polar_maps(const StokesImage<T>& stokes) {
    stokes.validate();
    PolarMaps<T> out;
    out.aolp = stokes.s0.zeros_like();
    out.dolp = stokes.s0.zeros_like();
    for (std::size_t i = 0; i < stokes.s0.size(); ++i) {
        const double s0 = stokes.s0[i];
        const double s1 = stokes.s1[i];
        const double s2 = stokes.s2[i];
        const double mag = std::sqrt(s1 * s1 + s2 * s2);
        double rho = 0.0;
        if (s0 > kEpsS0) rho = std::min(mag / s0, 1.0);
        double phi = 0.0;
        if (mag > kEpsS0) {
            phi = 0.5 * std::atan2(s2, s1);
            if (phi < 0.0) phi += kPi;
            if (phi >= kPi) phi -= kPi; // guard rounding at the seam
        }
        out.aolp[i] = static_cast<T>(phi);
        out.dolp[i] = static_cast<T>(rho);
    }
    return out;
}

// Malus-form inverse: i(theta) = (s0 + s1*cos2theta + s2*sin2theta) / 2.
// Requires physically valid Stokes (polarized magnitude <= s0).
template <typename T>
QuadIntensities<T> synthesize_intensities(const StokesImage<T>& stokes) {
    stokes.validate();
    QuadIntensities<T> out;
    out.i0 = stokes.s0.zeros_like();
    out.i45 = stokes.s0.zeros_like();
    out.i90 = stokes.s0.zeros_like();
    out.i135 = stokes.s0.zeros_like();
    for (std::size_t i = 0; i < stokes.s0.size(); ++i) {
        const double s0 = stokes.s0[i];
        const double s1 = stokes.s1[i];
        const double s2 = stokes.s2[i];
        const double mag = std::sqrt(s1 * s1 + s2 * s2);
        if (mag > s0 * (1.0 + 1e-9) + kEpsS0)
            throw ValidationError(
                "synthesize_intensities: polarized magnitude exceeds s0 (rho > 1)");
        out.i0[i] = static_cast<T>(0.5 * (s0 + s1));
        out.i90[i] = static_cast<T>(0.5 * (s0 - s1));
        out.i45[i] = static_cast<T>(0.5 * (s0 + s2));
        out.i135[i] = static_cast<T>(0.5 * (s0 - s2));
    }
    return out;
}

// |(i0+i90) - (i45+i135)| / max(kEpsS0, i0+i90), per pixel. Zero for data
// honoring the redundancy of the two total-intensity estimates.
template <typename T>
Tensor<T> consistency_residual(const QuadIntensities<T>& quad) {
    quad.validate();
    Tensor<T> out = quad.i0.zeros_like();
    for (std::size_t i = 0; i < quad.i0.size(); ++i) {
        const double a = quad.i0[i] + quad.i90[i];
        const double b = quad.i45[i] + quad.i135[i];
        out[i] = static_cast<T>(std::abs(a - b) / std::max(kEpsS0, a));
    }
    return out;
}

} // namespace rgbp
