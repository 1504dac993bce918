#pragma once

// Absolute constants for the default-parameter rules. The asymptotic rules
// only fix these up to unspecified constants; the values below are the
// smallest powers of two that met the target failure rates in the calibration
// experiment (`sose bench --sweep calibrate`, recorded in data/calibration.json).

namespace sose {

struct Calibration {
    /// Embedding dimension: m = C_m (d + ln(1/delta)) / eps^2 (oblivious).
    double c_m = 2.0;
    /// OSNAP sparsity: s = C_s (L^2/eps + L^3), L = ln(d/(eps delta)).
    double c_s = 1.0 / 128.0;
    /// Extra OSE-IE sparsity: s >= C_e L / eps^2.
    double c_e = 1.0;
    /// LESS dimension: m = C_mL ((d + ln^2(d/delta))/eps^2 + ln^3(d/delta)/eps).
    double c_m_less = 0.25;
    /// LESS density: pm = C_L max(L^2.5/eps, L^3).
    double c_l = 1.0 / 1024.0;
};

inline constexpr Calibration kDefaultCalibration{};

}  // namespace sose
