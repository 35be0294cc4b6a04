#include "nhsim/model.hpp"

#include <cmath>
#include <numbers>

namespace nhsim {

void LadderParams::validate() const {
    if (cells < 1) throw ConfigError("N must be >= 1");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
    if (!(v1 >= 0.0) || !(v2 >= 0.0) || !std::isfinite(v1) || !std::isfinite(v2))
        throw ConfigError("v1, v2 must be finite and nonnegative");
    if (!hardcore) throw ConfigError("only hardcore bosons are supported");
    for (auto [r, u] : interactions) {
        if (r < 1) throw ConfigError("interaction range must be >= 1, got " + std::to_string(r));
        if (!std::isfinite(u)) throw ConfigError("interaction strength must be finite");
    }
}

namespace {

void hop(MatrixXc& h, int i, int j, cd amp) {
    h(i, j) += amp;
    h(j, i) += std::conj(amp);
}

}  // namespace

MatrixXc build_single_particle(const LadderParams& p) {
    p.validate();
    const int n = p.cells;
    MatrixXc h = MatrixXc::Zero(2 * n, 2 * n);
    auto a = [](int x) { return 2 * x - 2; };
    auto b = [](int x) { return 2 * x - 1; };
    for (int x = 1; x <= n; ++x) {
        h(b(x), b(x)) += -I * p.gamma;
        hop(h, a(x), b(x), p.v1);
        if (x == n && p.boundary == Boundary::open) continue;
        const int y = x == n ? 1 : x + 1;
        const double w = p.v2 / 2;
        hop(h, a(y), b(x), w);
        hop(h, b(y), a(x), w);
        hop(h, a(y), a(x), I * w);
        hop(h, b(y), b(x), -I * w);
    }
    return h;
}

MatrixXc build_many_body(const LadderParams& p, const SectorEncoding& enc) {
    p.validate();
    if (enc.cells() != p.cells) throw std::invalid_argument("build_many_body: encoding built for another ladder");
    const MatrixXc h1 = build_single_particle(p);
    const int ns = enc.sites();
    const auto dim = static_cast<Eigen::Index>(enc.dim());

    // nonzero off-diagonal amplitudes per source site
    std::vector<std::vector<std::pair<int, cd>>> moves(ns);
    for (int j = 0; j < ns; ++j)
        for (int i = 0; i < ns; ++i)
            if (i != j && h1(i, j) != cd{}) moves[j].push_back({i, h1(i, j)});

    MatrixXc h = MatrixXc::Zero(dim, dim);
    std::vector<int> occ, cfg;
    for (Eigen::Index col = 0; col < dim; ++col) {
        cfg = enc.unrank(static_cast<std::size_t>(col));
        occ.assign(ns, 0);
        for (int s : cfg) occ[s] = 1;

        cd diag{};
        for (int s : cfg) diag += h1(s, s);
        for (auto [r, u] : p.interactions) {
            int pairs = 0;
            for (int z = 0; z < ns; ++z) {
                int w = z + r;
                if (w >= ns) {
                    if (p.boundary == Boundary::open) break;
                    w %= ns;
                }
                pairs += occ[z] * occ[w];
            }
            diag += u * pairs;
        }
        h(col, col) += diag;

        for (int k = 0; k < static_cast<int>(cfg.size()); ++k) {
            const int src = cfg[k];
            for (auto [dst, amp] : moves[src]) {
                if (occ[dst]) continue;  // hardcore
                std::vector<int> next = cfg;
                next[k] = dst;
                std::sort(next.begin(), next.end());
                h(static_cast<Eigen::Index>(enc.rank(next)), col) += amp;
            }
        }
    }
    return h;
}

BlochResult bloch(const LadderParams& p, double k) {
    const double hx = p.v1 + p.v2 * std::cos(k);
    const cd hz = p.v2 * std::sin(k) + I * p.gamma / 2.0;
    BlochResult out;
    Eigen::Matrix2cd sx, sz;
    sx << 0, 1, 1, 0;
    sz << 1, 0, 0, -1;
    out.matrix = hx * sx + hz * sz - (I * p.gamma / 2.0) * Eigen::Matrix2cd::Identity();
    const cd s = std::sqrt(hx * hx + hz * hz);
    out.energies = {-I * p.gamma / 2.0 + s, -I * p.gamma / 2.0 - s};
    return out;
}

GapResult dissipative_gap(const LadderParams& p, int k_samples) {
    if (k_samples < 64) throw std::invalid_argument("dissipative_gap: need at least 64 k samples");
    constexpr double two_pi = 2 * std::numbers::pi;
    // bands are mirror images about -gamma/2, so only |Im sqrt| is needed
    auto spread = [&](double k) {
        const double hx = p.v1 + p.v2 * std::cos(k);
        const cd hz = p.v2 * std::sin(k) + I * p.gamma / 2.0;
        return std::abs(std::sqrt(hx * hx + hz * hz).imag());
    };
    std::vector<double> f(k_samples);
    const double dk = two_pi / k_samples;
    for (int j = 0; j < k_samples; ++j) f[j] = spread(j * dk);

    double best = 0.0;
    for (int j = 0; j < k_samples; ++j) {
        best = std::max(best, f[j]);
        const double fl = f[(j + k_samples - 1) % k_samples], fr = f[(j + 1) % k_samples];
        if (f[j] < fl || f[j] < fr) continue;
        // golden-section on the bracketing cell pair
        double lo = (j - 1) * dk, hi = (j + 1) * dk;
        const double g = (std::sqrt(5.0) - 1) / 2;
        double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
        double fc = spread(c), fd = spread(d);
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            if (fc > fd) {
                hi = d; d = c; fd = fc;
                c = hi - g * (hi - lo); fc = spread(c);
            } else {
                lo = c; c = d; fc = fd;
                d = lo + g * (hi - lo); fd = spread(d);
            }
        }
        best = std::max({best, fc, fd});
    }
    GapResult out;
    out.max_im = -p.gamma / 2 + best;
    out.min_im = -p.gamma / 2 - best;
    out.gap = std::max(0.0, -out.max_im);
    return out;
}

}  // namespace nhsim
