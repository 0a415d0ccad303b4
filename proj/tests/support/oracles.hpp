#pragma once

// Independent numeric oracles used by the test suites. These intentionally
// avoid the library's own code paths (and Eigen's rotation helpers) so they
// can serve as a second route.

#include <array>
#include <cmath>
#include <vector>

namespace oracle {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Rodrigues formula: R = I + sin(t) K + (1 - cos(t)) K^2, axis normalized.
inline Mat3 rodrigues(double ax, double ay, double az, double angle) {
    double n = std::sqrt(ax * ax + ay * ay + az * az);
    ax /= n; ay /= n; az /= n;
    double s = std::sin(angle), c = std::cos(angle), C = 1.0 - c;
    return Mat3{{{c + ax * ax * C, ax * ay * C - az * s, ax * az * C + ay * s},
                 {ay * ax * C + az * s, c + ay * ay * C, ay * az * C - ax * s},
                 {az * ax * C - ay * s, az * ay * C + ax * s, c + az * az * C}}};
}

// Cross product helper for the facing-direction oracle.
inline std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Brute-force DTW: enumerate every monotone boundary-anchored path with
// steps {(1,0),(0,1),(1,1)} and return the minimal summed distance.
inline double dtw_bruteforce(const std::vector<std::vector<double>>& dist) {
    size_t n = dist.size(), m = dist[0].size();
    double best = 1e300;
    struct State { size_t i, j; double cost; };
    std::vector<State> stack{{0, 0, dist[0][0]}};
    while (!stack.empty()) {
        State s = stack.back();
        stack.pop_back();
        if (s.i == n - 1 && s.j == m - 1) {
            best = std::min(best, s.cost);
            continue;
        }
        if (s.i + 1 < n) stack.push_back({s.i + 1, s.j, s.cost + dist[s.i + 1][s.j]});
        if (s.j + 1 < m) stack.push_back({s.i, s.j + 1, s.cost + dist[s.i][s.j + 1]});
        if (s.i + 1 < n && s.j + 1 < m)
            stack.push_back({s.i + 1, s.j + 1, s.cost + dist[s.i + 1][s.j + 1]});
    }
    return best;
}

// Jacobi eigendecomposition of a symmetric matrix; returns eigenvalues.
// Used as the independent route for the FMD matrix square root.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-26) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (size_t i = 0; i < n; ++i) eig[i] = a[i][i];
    return eig;
}

}  // namespace oracle
