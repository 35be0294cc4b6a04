#include "nhsim/mitigation.hpp"

#include <cmath>
#include <set>

#include <Eigen/SVD>
#include <json.hpp>

namespace nhsim {

void CalibrationSet::validate() const {
    if (sub_registers.size() != matrices.size()) throw std::invalid_argument("calibration: registers/matrices mismatch");
    std::set<int> seen;
    for (std::size_t g = 0; g < sub_registers.size(); ++g) {
        const auto& reg = sub_registers[g];
        if (reg.empty() || reg.size() > 5) throw std::invalid_argument("calibration: sub-register size must be 1..5");
        for (int q : reg)
            if (!seen.insert(q).second) throw std::invalid_argument("calibration: sub-registers overlap");
        const Eigen::MatrixXd& m = matrices[g];
        const Eigen::Index d = Eigen::Index{1} << reg.size();
        if (m.rows() != d || m.cols() != d) throw std::invalid_argument("calibration: matrix size mismatch");
        if (m.minCoeff() < 0) throw std::invalid_argument("calibration: negative entry");
        if ((m.colwise().sum().array() - 1.0).abs().maxCoeff() > 1e-9)
            throw std::invalid_argument("calibration: matrix is not column-stochastic");
    }
}

Eigen::MatrixXd CalibrationSet::marginal(const std::vector<int>& qubits) const {
    const int L = static_cast<int>(qubits.size());
    if (L > 12) throw std::invalid_argument("marginal: too many qubits");
    // locate each layer qubit in its sub-register
    struct Slot {
        std::size_t g;
        int pos;
    };
    std::vector<Slot> slots;
    for (int q : qubits) {
        bool found = false;
        for (std::size_t g = 0; g < sub_registers.size() && !found; ++g)
            for (std::size_t p = 0; p < sub_registers[g].size(); ++p)
                if (sub_registers[g][p] == q) {
                    slots.push_back({g, static_cast<int>(p)});
                    found = true;
                }
        if (!found) throw std::invalid_argument("marginal: qubit " + std::to_string(q) + " not calibrated");
    }
    // per sub-register marginal on the kept positions, averaging over dropped preparations
    std::map<std::size_t, std::vector<int>> kept;  // g -> positions in layer order of appearance
    for (const auto& s : slots) kept[s.g].push_back(s.pos);
    std::map<std::size_t, Eigen::MatrixXd> marg;
    for (const auto& [g, pos] : kept) {
        const int ng = static_cast<int>(sub_registers[g].size());
        const int k = static_cast<int>(pos.size());
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(Eigen::Index{1} << k, Eigen::Index{1} << k);
        auto project = [&](int full) {
            int r = 0;
            for (int i = 0; i < k; ++i) r = (r << 1) | ((full >> (ng - 1 - pos[i])) & 1);
            return r;
        };
        for (int a = 0; a < (1 << ng); ++a)
            for (int b = 0; b < (1 << ng); ++b) m(project(a), project(b)) += matrices[g](a, b);
        m /= std::ldexp(1.0, ng - k);
        marg[g] = std::move(m);
    }
    const Eigen::Index d = Eigen::Index{1} << L;
    Eigen::MatrixXd out(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) {
            double v = 1;
            for (const auto& [g, pos] : kept) {
                int ra = 0, rb = 0;
                for (int i = 0; i < L; ++i) {
                    if (slots[i].g != g) continue;
                    ra = (ra << 1) | static_cast<int>((a >> (L - 1 - i)) & 1);
                    rb = (rb << 1) | static_cast<int>((b >> (L - 1 - i)) & 1);
                }
                v *= marg[g](ra, rb);
            }
            out(a, b) = v;
        }
    return out;
}

std::vector<std::vector<int>> default_sub_registers(int n_qubits, int max_size) {
    std::vector<std::vector<int>> out;
    for (int q = 0; q < n_qubits; q += max_size) {
        std::vector<int> reg;
        for (int i = q; i < std::min(n_qubits, q + max_size); ++i) reg.push_back(i);
        out.push_back(std::move(reg));
    }
    return out;
}

CalibrationSet calibrate(const NoiseModel* noise, int n_qubits, const std::vector<std::vector<int>>& regs,
                         std::size_t shots, std::uint64_t seed) {
    if (shots < 1000) throw std::invalid_argument("calibrate: need at least 1000 shots per basis state");
    CalibrationSet cal;
    cal.sub_registers = regs;
    int max_n = 0;
    for (const auto& r : regs) {
        max_n = std::max<int>(max_n, static_cast<int>(r.size()));
        cal.matrices.push_back(Eigen::MatrixXd::Zero(Eigen::Index{1} << r.size(), Eigen::Index{1} << r.size()));
    }
    Rng rng(seed);
    // merged schedule: circuit t prepares t mod 2^{n_g} on every sub-register at once
    for (int t = 0; t < (1 << max_n); ++t) {
        Circuit c(n_qubits);
        for (const auto& r : regs) {
            const int ng = static_cast<int>(r.size());
            const int val = t % (1 << ng);
            for (int i = 0; i < ng; ++i)
                if ((val >> (ng - 1 - i)) & 1) c.x(r[i]);
        }
        std::vector<int> clbit_of(n_qubits, -1);
        for (const auto& r : regs)
            for (int q : r) clbit_of[q] = c.measure(q);
        const RunOutput out = run(c, ExecMode::sampled(shots), noise, rng);
        ++cal.circuits;
        for (std::size_t g = 0; g < regs.size(); ++g) {
            const int ng = static_cast<int>(regs[g].size());
            const int prep = t % (1 << ng);
            for (const auto& [key, v] : out.counts) {
                int obs = 0;
                for (int i = 0; i < ng; ++i) obs = (obs << 1) | (key[clbit_of[regs[g][i]]] == '1');
                cal.matrices[g](obs, prep) += static_cast<double>(v);
            }
        }
    }
    for (auto& m : cal.matrices) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m.col(c) /= m.col(c).sum();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
        const auto& s = svd.singularValues();
        if (s(s.size() - 1) <= 0 || s(0) / s(s.size() - 1) > 1e6)
            throw std::runtime_error("calibrate: confusion matrix is singular");
    }
    cal.validate();
    return cal;
}

std::string calibration_to_json(const CalibrationSet& cal) {
    nlohmann::json j;
    j["sub_registers"] = cal.sub_registers;
    j["circuits"] = cal.circuits;
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : cal.matrices) {
        std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
        ms.push_back(rows);
    }
    j["matrices"] = ms;
    return j.dump(1);
}

CalibrationSet calibration_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    CalibrationSet cal;
    cal.sub_registers = j.at("sub_registers").get<std::vector<std::vector<int>>>();
    cal.circuits = j.value("circuits", std::size_t{0});
    for (const auto& rows : j.at("matrices")) {
        const auto v = rows.get<std::vector<std::vector<double>>>();
        Eigen::MatrixXd m(v.size(), v.empty() ? 0 : v[0].size());
        for (std::size_t r = 0; r < v.size(); ++r)
            for (std::size_t c = 0; c < v[r].size(); ++c) m(r, c) = v[r][c];
        cal.matrices.push_back(std::move(m));
    }
    cal.validate();
    return cal;
}

namespace {

// apply a (2^L x 2^L) matrix along the bit block [off, off + L) of a 2^B vector (MSB first)
void apply_axis(Eigen::VectorXd& p, int total_bits, int off, const Eigen::MatrixXd& m) {
    const int L = static_cast<int>(std::log2(m.rows()) + 0.5);
    const Eigen::Index inner = Eigen::Index{1} << (total_bits - off - L);
    const Eigen::Index outer = Eigen::Index{1} << off;
    const Eigen::Index d = m.rows();
    Eigen::VectorXd tmp(d);
    for (Eigen::Index o = 0; o < outer; ++o)
        for (Eigen::Index i = 0; i < inner; ++i) {
            for (Eigen::Index a = 0; a < d; ++a) tmp(a) = p((o * d + a) * inner + i);
            tmp = m * tmp;
            for (Eigen::Index a = 0; a < d; ++a) p((o * d + a) * inner + i) = tmp(a);
        }
}

}  // namespace

std::map<std::string, double> mitigate_counts(const std::map<std::string, std::uint64_t>& counts,
                                              const std::vector<std::vector<int>>& layers,
                                              const CalibrationSet& cal) {
    int bits = 0;
    for (const auto& l : layers) bits += static_cast<int>(l.size());
    if (bits > 22) throw std::invalid_argument("mitigate_counts: too many measured bits");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(Eigen::Index{1} << bits);
    double total = 0;
    for (const auto& [key, v] : counts) {
        if (static_cast<int>(key.size()) != bits)
            throw std::invalid_argument("mitigate_counts: key '" + key + "' does not match the layer structure");
        p(static_cast<Eigen::Index>(std::stoull(key, nullptr, 2))) += static_cast<double>(v);
        total += static_cast<double>(v);
    }
    if (total <= 0) throw std::invalid_argument("mitigate_counts: no counts");
    int off = 0;
    for (const auto& l : layers) {
        apply_axis(p, bits, off, cal.marginal(l).inverse());
        off += static_cast<int>(l.size());
    }
    p = project_simplex(p, total);
    std::map<std::string, double> out;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= 0) continue;
        std::string key(bits, '0');
        for (int b = 0; b < bits; ++b)
            if ((i >> (bits - 1 - b)) & 1) key[b] = '1';
        out[key] = p(i);
    }
    return out;
}

Eigen::VectorXd mitigate_postselected(const LayeredCounts& counts, int layers, int ancilla,
                                      const std::vector<int>& system_qubits, std::size_t dim,
                                      const CalibrationSet& cal) {
    const Eigen::Matrix2d ma = cal.marginal({ancilla}).inverse();
    const Eigen::MatrixXd ms = cal.marginal(system_qubits).inverse();
    const Eigen::Index ds = ms.rows();
    // prod_l Minv[0, a_l] = Minv00^{j-k} Minv01^k; the common Minv00^j drops out on normalization
    const double ratio = ma(0, 1) / ma(0, 0);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(ds);
    for (const auto& [key, v] : counts) {
        const auto [k, s] = key;
        if (k > layers) throw std::invalid_argument("mitigate_postselected: more failures than layers");
        if (s >= static_cast<std::uint64_t>(ds)) throw std::invalid_argument("mitigate_postselected: key out of range");
        q(static_cast<Eigen::Index>(s)) += static_cast<double>(v) * std::pow(ratio, k);
    }
    Eigen::VectorXd p = ms * q;
    if (!(p.sum() > 0)) p = q.cwiseMax(0.0);
    if (!(p.sum() > 0)) throw std::runtime_error("mitigate_postselected: no post-selected weight");
    p = project_simplex(Eigen::VectorXd(p / p.sum()), 1.0);
    Eigen::VectorXd phys = p.head(static_cast<Eigen::Index>(dim));
    const double tot = phys.sum();
    if (!(tot > 0)) throw std::runtime_error("mitigate_postselected: no physical probability left");
    return phys / tot;
}

QpResult solve_qp(const Eigen::MatrixXd& g, const Eigen::VectorXd& c, const Eigen::MatrixXd& a_eq,
                  const Eigen::VectorXd& b_eq, const Eigen::MatrixXd& a_in, const Eigen::VectorXd& b_in,
                  Eigen::VectorXd x) {
    const Eigen::Index n = g.rows(), me = a_eq.rows(), mi = a_in.rows();
    constexpr double tol = 1e-10;
    if (me && (a_eq * x - b_eq).cwiseAbs().maxCoeff() > 1e-8)
        throw std::invalid_argument("solve_qp: start violates equalities");
    if (mi && (a_in * x - b_in).minCoeff() < -1e-8) throw std::invalid_argument("solve_qp: start violates inequalities");

    std::vector<Eigen::Index> work;  // active inequality rows
    auto active_matrix = [&] {
        Eigen::MatrixXd a(me + static_cast<Eigen::Index>(work.size()), n);
        if (me) a.topRows(me) = a_eq;
        for (std::size_t i = 0; i < work.size(); ++i) a.row(me + static_cast<Eigen::Index>(i)) = a_in.row(work[i]);
        return a;
    };
    // start with tight inequalities that keep the working set independent
    for (Eigen::Index i = 0; i < mi; ++i) {
        if (std::abs(a_in.row(i).dot(x) - b_in(i)) > 1e-12) continue;
        work.push_back(i);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(active_matrix());
        if (lu.rank() < me + static_cast<Eigen::Index>(work.size())) work.pop_back();
    }

    QpResult res;
    Eigen::VectorXd lambda;
    for (int it = 0; it < 1000; ++it) {
        res.iterations = it + 1;
        const Eigen::MatrixXd a = active_matrix();
        const Eigen::Index m = a.rows();
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
        kkt.topLeftCorner(n, n) = g;
        kkt.topRightCorner(n, m) = -a.transpose();
        kkt.bottomLeftCorner(m, n) = a;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
        rhs.head(n) = -(g * x + c);
        const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
        const Eigen::VectorXd p = sol.head(n);
        lambda = sol.tail(m);
        if (p.lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
            // multipliers of the inequalities must be nonnegative
            Eigen::Index worst = -1;
            double most = -tol;
            for (std::size_t i = 0; i < work.size(); ++i)
                if (lambda(me + static_cast<Eigen::Index>(i)) < most) {
                    most = lambda(me + static_cast<Eigen::Index>(i));
                    worst = static_cast<Eigen::Index>(i);
                }
            if (worst < 0) {
                x += p;
                break;
            }
            work.erase(work.begin() + worst);
            continue;
        }
        double alpha = 1.0;
        Eigen::Index block = -1;
        for (Eigen::Index i = 0; i < mi; ++i) {
            if (std::find(work.begin(), work.end(), i) != work.end()) continue;
            const double ap = a_in.row(i).dot(p);
            if (ap < -1e-14) {
                const double step = (b_in(i) - a_in.row(i).dot(x)) / ap;
                if (step < alpha) {
                    alpha = std::max(step, 0.0);
                    block = i;
                }
            }
        }
        x += alpha * p;
        if (block >= 0) work.push_back(block);
        if (it == 999) throw ConvergenceError("solve_qp: active-set iteration limit reached");
    }
    res.x = x;

    // KKT residual: stationarity, feasibility, complementarity, dual sign
    Eigen::VectorXd mult_in = Eigen::VectorXd::Zero(mi);
    Eigen::VectorXd mult_eq = me ? Eigen::VectorXd(lambda.head(me)) : Eigen::VectorXd();
    for (std::size_t i = 0; i < work.size(); ++i) mult_in(work[i]) = lambda(me + static_cast<Eigen::Index>(i));
    Eigen::VectorXd stat = g * x + c;
    if (me) stat -= a_eq.transpose() * mult_eq;
    if (mi) stat -= a_in.transpose() * mult_in;
    double r = stat.lpNorm<Eigen::Infinity>();
    if (me) r = std::max(r, (a_eq * x - b_eq).lpNorm<Eigen::Infinity>());
    if (mi) {
        const Eigen::VectorXd slack = a_in * x - b_in;
        r = std::max(r, std::max(0.0, -slack.minCoeff()));
        r = std::max(r, std::max(0.0, -mult_in.minCoeff()));
        r = std::max(r, slack.cwiseProduct(mult_in).lpNorm<Eigen::Infinity>());
    }
    res.kkt_residual = r;
    return res;
}

ZneResult zne(const ZneInput& in) {
    const auto& lam = in.lambdas;
    const Eigen::Index L = static_cast<Eigen::Index>(lam.size());
    const Eigen::Index K = in.values.rows();
    if (L < 2) throw std::invalid_argument("zne: need at least two noise levels");
    if (std::abs(lam[0] - 1.0) > 1e-12) throw std::invalid_argument("zne: lambda list must start at 1");
    for (Eigen::Index i = 1; i < L; ++i)
        if (!(lam[i] > lam[i - 1])) throw std::invalid_argument("zne: lambdas must be strictly increasing");
    if (in.values.cols() != L) throw std::invalid_argument("zne: value matrix does not match lambdas");
    std::vector<ObservableKind> kinds = in.kinds;
    if (kinds.empty()) kinds.assign(K, ObservableKind::other);
    if (static_cast<Eigen::Index>(kinds.size()) != K) throw std::invalid_argument("zne: kinds size mismatch");

    // x = [c_0..c_{K-1}, m_0..m_{K-1}]
    const Eigen::Index n = 2 * K;
    double s1 = 0, s2 = 0;
    for (double l : lam) {
        s1 += l;
        s2 += l * l;
    }
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < K; ++k) {
        g(k, k) = 2.0 * L;
        g(k, K + k) = g(K + k, k) = 2 * s1;
        g(K + k, K + k) = 2 * s2;
        double sy = 0, sly = 0;
        for (Eigen::Index i = 0; i < L; ++i) {
            sy += in.values(k, i);
            sly += lam[i] * in.values(k, i);
        }
        c(k) = -2 * sy;
        c(K + k) = -2 * sly;
    }

    const double lmax = lam.back();
    std::vector<Eigen::VectorXd> rows_in;
    std::vector<double> rhs_in;
    auto bound = [&](Eigen::Index k, double lo, double hi) {
        for (double l : {0.0, lmax}) {
            Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
            r(k) = 1;
            r(K + k) = l;
            rows_in.push_back(r);
            rhs_in.push_back(lo);
            rows_in.push_back(-r);
            rhs_in.push_back(-hi);
        }
    };
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    Eigen::Index n_occ = 0;
    for (auto k : kinds) n_occ += k == ObservableKind::occupancy;
    for (Eigen::Index k = 0; k < K; ++k) {
        if (kinds[k] == ObservableKind::occupancy && (in.occupancy_bounds || in.number_sum)) {
            if (in.occupancy_bounds) bound(k, 0.0, 1.0);
            x0(k) = in.number_sum ? *in.number_sum / static_cast<double>(n_occ)
                                  : std::clamp(in.values.row(k).mean(), 0.0, 1.0);
        } else if (kinds[k] == ObservableKind::imaginary_energy && in.ime_bounds) {
            const double lo = -(*in.ime_bounds)[0] * (*in.ime_bounds)[1];
            bound(k, lo, 0.0);
            x0(k) = lo / 2;
        } else {
            x0(k) = in.values.row(k).mean();
        }
    }
    Eigen::MatrixXd a_eq(0, n);
    Eigen::VectorXd b_eq(0);
    if (in.number_sum) {
        if (n_occ == 0) throw std::invalid_argument("zne: number constraint without occupancy observables");
        if (*in.number_sum < 0 || *in.number_sum > static_cast<double>(n_occ))
            throw std::invalid_argument("zne: inconsistent particle number constraint");
        a_eq = Eigen::MatrixXd::Zero(2, n);
        for (Eigen::Index k = 0; k < K; ++k)
            if (kinds[k] == ObservableKind::occupancy) {
                a_eq(0, k) = 1;
                a_eq(1, K + k) = 1;
            }
        b_eq = Eigen::Vector2d(*in.number_sum, 0.0);
    }
    Eigen::MatrixXd a_in(static_cast<Eigen::Index>(rows_in.size()), n);
    Eigen::VectorXd b_in(static_cast<Eigen::Index>(rows_in.size()));
    for (std::size_t i = 0; i < rows_in.size(); ++i) {
        a_in.row(static_cast<Eigen::Index>(i)) = rows_in[i].transpose();
        b_in(static_cast<Eigen::Index>(i)) = rhs_in[i];
    }
    const QpResult qp = solve_qp(g, c, a_eq, b_eq, a_in, b_in, x0);
    ZneResult out;
    out.intercepts = qp.x.head(K);
    out.gradients = qp.x.tail(K);
    out.kkt_residual = qp.kkt_residual;
    out.iterations = qp.iterations;
    return out;
}

}  // namespace nhsim
