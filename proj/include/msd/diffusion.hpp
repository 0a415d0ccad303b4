#pragma once

// Noise schedules, closed-form forward diffusion, x0-parameterized DDPM
// posterior steps and deterministic (eta = 0) DDIM sub-stepping. All steps
// are pure; callers inject noise so every stochastic path is reproducible.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "msd/errors.hpp"
#include "msd/tensor.hpp"

namespace msd {

struct DiffusionSchedule {
    std::string kind;     // "cosine" | "linear"
    size_t T = 1000;      // DDPM steps
    size_t S = 20;        // DDIM sub-steps
    std::vector<double> alpha;      // alpha[t], t in [1, T]; alpha[0] = 1
    std::vector<double> alpha_bar;  // cumulative products; alpha_bar[0] = 1
    std::vector<size_t> ddim_index_map;  // S ascending t values, ends at T

    double beta(size_t t) const { return 1.0 - alpha[t]; }
};

inline void validate_schedule(const DiffusionSchedule& s) {
    if (s.T < 1 || s.S < 1 || s.S > s.T) throw InvalidSchedule("need T >= S >= 1");
    if (s.alpha.size() != s.T + 1 || s.alpha_bar.size() != s.T + 1)
        throw InvalidSchedule("alpha tables must have T+1 entries");
    for (size_t t = 1; t <= s.T; ++t) {
        if (!(s.alpha[t] > 0.0 && s.alpha[t] < 1.0)) throw InvalidSchedule("alpha_t outside (0,1)");
        if (t >= 2 && !(s.alpha[t] < s.alpha[t - 1]))
            throw InvalidSchedule("alpha_t must be strictly decreasing");
    }
    if (s.T > 1 && !(s.alpha_bar[s.T] < 1e-3))
        throw InvalidSchedule("alpha_bar_T must be < 1e-3 (m_T ~ standard normal)");
    if (s.ddim_index_map.size() != s.S || s.ddim_index_map.back() != s.T)
        throw InvalidSchedule("ddim map must have S entries ending at T");
    for (size_t i = 1; i < s.ddim_index_map.size(); ++i)
        if (s.ddim_index_map[i] <= s.ddim_index_map[i - 1])
            throw InvalidSchedule("ddim map must be strictly increasing");
}

inline DiffusionSchedule make_schedule(const std::string& kind, size_t T = 1000, size_t S = 20) {
    if (T < 1 || S < 1 || S > T) throw InvalidSchedule("need T >= S >= 1");
    DiffusionSchedule s;
    s.kind = kind;
    s.T = T;
    s.S = S;
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    if (kind == "cosine") {
        const double off = 0.008;
        auto f = [&](double t) {
            double v = std::cos((t / double(T) + off) / (1.0 + off) * M_PI / 2.0);
            return v * v;
        };
        double f0 = f(0.0);
        for (size_t t = 1; t <= T; ++t) {
            s.alpha_bar[t] = f(double(t)) / f0;
            s.alpha[t] = s.alpha_bar[t] / s.alpha_bar[t - 1];
        }
    } else if (kind == "linear") {
        // classic beta ramp, rescaled so the tail stays comparable as T varies
        double scale = 1000.0 / double(T);
        double beta0 = 1e-4 * scale, beta1 = 0.02 * scale;
        for (size_t t = 1; t <= T; ++t) {
            double beta = T == 1 ? beta1 : beta0 + (beta1 - beta0) * double(t - 1) / double(T - 1);
            s.alpha[t] = 1.0 - beta;
            s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        }
    } else {
        throw InvalidSchedule("unknown schedule kind: " + kind);
    }
    // evenly spaced DDIM grid ending exactly at T
    s.ddim_index_map.resize(S);
    for (size_t i = 1; i <= S; ++i)
        s.ddim_index_map[i - 1] = static_cast<size_t>(std::llround(double(i) * double(T) / double(S)));
    s.ddim_index_map.back() = T;
    if (T > 1 || S > 1) validate_schedule(s);
    return s;
}

// --- grid helpers -------------------------------------------------------------

inline size_t ddim_grid_position(const DiffusionSchedule& s, size_t t) {
    auto it = std::lower_bound(s.ddim_index_map.begin(), s.ddim_index_map.end(), t);
    if (it == s.ddim_index_map.end() || *it != t)
        throw NotOnDdimGrid("t = " + std::to_string(t) + " is not on the DDIM grid");
    return size_t(it - s.ddim_index_map.begin());
}

// Largest grid value <= k (0 when k is below the whole grid).
inline size_t ddim_snap_down(const DiffusionSchedule& s, size_t k) {
    size_t best = 0;
    for (size_t t : s.ddim_index_map) {
        if (t <= k) best = t;
        else break;
    }
    return best;
}

// Descending grid values <= k: the reverse-chain visit order.
inline std::vector<size_t> ddim_chain(const DiffusionSchedule& s, size_t k) {
    std::vector<size_t> chain;
    for (size_t t : s.ddim_index_map)
        if (t <= k) chain.push_back(t);
    std::reverse(chain.begin(), chain.end());
    return chain;
}

inline size_t ddim_prev(const DiffusionSchedule& s, size_t t) {
    size_t pos = ddim_grid_position(s, t);
    return pos == 0 ? 0 : s.ddim_index_map[pos - 1];
}

// --- forward process ------------------------------------------------------------

inline void check_step_range(const DiffusionSchedule& s, size_t t, const char* op) {
    if (t < 1 || t > s.T) throw InvalidSchedule(std::string(op) + ": t outside [1, T]");
}

// m_t = sqrt(abar_t) m0 + sqrt(1 - abar_t) eps
inline Tensor forward_sample(const DiffusionSchedule& s, const Tensor& m0, size_t t,
                             const Tensor& eps) {
    check_step_range(s, t, "forward_sample");
    detail::check_same_shape(m0, eps, "forward_sample");
    double ab = s.alpha_bar[t];
    return axpy(scale(m0, std::sqrt(ab)), std::sqrt(1.0 - ab), eps);
}

// single Markov step: m_t = sqrt(alpha_t) m_{t-1} + sqrt(1 - alpha_t) eps
inline Tensor forward_step(const DiffusionSchedule& s, const Tensor& m_prev, size_t t,
                           const Tensor& eps) {
    check_step_range(s, t, "forward_step");
    detail::check_same_shape(m_prev, eps, "forward_step");
    double a = s.alpha[t];
    return axpy(scale(m_prev, std::sqrt(a)), std::sqrt(1.0 - a), eps);
}

inline double forward_step_scalar(const DiffusionSchedule& s, double m_prev, size_t t,
                                  double eps) {
    check_step_range(s, t, "forward_step");
    double a = s.alpha[t];
    return std::sqrt(a) * m_prev + std::sqrt(1.0 - a) * eps;
}

// --- DDPM reverse -----------------------------------------------------------------

// Posterior q(m_{t-1} | m_t, m0) with m0 replaced by the prediction x0_hat;
// adds sigma_t * eps_fresh for t > 1, nothing at the t = 1 boundary.
inline Tensor ddpm_reverse_step(const DiffusionSchedule& s, const Tensor& m_t, size_t t,
                                const Tensor& x0_hat, const Tensor& eps_fresh) {
    check_step_range(s, t, "ddpm_reverse_step");
    detail::check_same_shape(m_t, x0_hat, "ddpm_reverse_step");
    double ab_t = s.alpha_bar[t];
    double ab_prev = s.alpha_bar[t - 1];
    double beta = s.beta(t);
    double coef_x0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
    double coef_mt = std::sqrt(s.alpha[t]) * (1.0 - ab_prev) / (1.0 - ab_t);
    Tensor mean = axpy(scale(x0_hat, coef_x0), coef_mt, m_t);
    if (t == 1) return mean;
    detail::check_same_shape(m_t, eps_fresh, "ddpm_reverse_step");
    double sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab_t) * beta);
    return axpy(mean, sigma, eps_fresh);
}

// --- DDIM (eta = 0) -----------------------------------------------------------------

// Implied noise from the closed-form forward sample.
inline Tensor ddim_implied_noise(const DiffusionSchedule& s, const Tensor& m_t, size_t t,
                                 const Tensor& x0_hat) {
    double ab = s.alpha_bar[t];
    return scale(axpy(m_t, -std::sqrt(ab), x0_hat), 1.0 / std::sqrt(1.0 - ab));
}

// Deterministic reverse step t -> t_prev; both on the grid and adjacent
// (t_prev may be 0 below the lowest grid point, or equal to t: identity).
inline Tensor ddim_reverse_step(const DiffusionSchedule& s, const Tensor& m_t, size_t t,
                                size_t t_prev, const Tensor& x0_hat) {
    detail::check_same_shape(m_t, x0_hat, "ddim_reverse_step");
    if (t_prev != t && ddim_prev(s, t) != t_prev)
        throw NotOnDdimGrid("ddim_reverse_step: (t, t_prev) not adjacent on the grid");
    Tensor eps = ddim_implied_noise(s, m_t, t, x0_hat);
    double ab_prev = t_prev == 0 ? 1.0 : s.alpha_bar[t_prev];
    return axpy(scale(x0_hat, std::sqrt(ab_prev)), std::sqrt(1.0 - ab_prev), eps);
}

// Deterministic inversion step t_from -> t_to (adjacent going up). At
// t_from = 0 the sample is clean: x0 is the sample itself and the implied
// noise is zero by convention.
inline Tensor ddim_forward_step(const DiffusionSchedule& s, const Tensor& m_from, size_t t_from,
                                size_t t_to, const Tensor& x0_hat) {
    detail::check_same_shape(m_from, x0_hat, "ddim_forward_step");
    size_t pos_to = ddim_grid_position(s, t_to);
    size_t expected_from = pos_to == 0 ? 0 : s.ddim_index_map[pos_to - 1];
    if (t_from != expected_from)
        throw NotOnDdimGrid("ddim_forward_step: (t_from, t_to) not adjacent on the grid");
    double ab_to = s.alpha_bar[t_to];
    if (t_from == 0) return scale(m_from, std::sqrt(ab_to));
    Tensor eps = ddim_implied_noise(s, m_from, t_from, x0_hat);
    return axpy(scale(x0_hat, std::sqrt(ab_to)), std::sqrt(1.0 - ab_to), eps);
}

}  // namespace msd
