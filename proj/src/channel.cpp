#include "mimo/channel.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/Eigenvalues>

namespace mimo {

namespace {

void fill_iid(CplxMatrix& h, double per_component_sd, RngStream& rng) {
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        for (Eigen::Index j = 0; j < h.cols(); ++j) {
            const double re = rng.gaussian() * per_component_sd;
            const double im = rng.gaussian() * per_component_sd;
            h(i, j) = CplxScalar(re, im);
        }
    }
}

RealMatrix correlation_sqrt(std::uint32_t n, double rho) {
    const RealMatrix r = exp_correlation(n, rho);
    Eigen::SelfAdjointEigenSolver<RealMatrix> eig(r);
    return eig.eigenvectors() *
           eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           eig.eigenvectors().transpose();
}

void require_rho(double rho, const char* name) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw ContractError(std::string("gen_kronecker: ") + name +
                            " must lie in [0, 1), got " + std::to_string(rho));
    }
}

} // namespace

RealMatrix exp_correlation(std::uint32_t n, double rho) {
    RealMatrix r(n, n);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < n; ++j) {
            r(i, j) = std::pow(rho, double(i > j ? i - j : j - i));
        }
    }
    return r;
}

ChannelRealization gen_iid_gaussian(std::uint32_t n_r, std::uint32_t n_t, RngStream& rng) {
    if (n_r < n_t || n_t < 1) {
        throw ContractError("gen_iid_gaussian: need n_r >= n_t >= 1");
    }
    ChannelRealization c;
    c.h.resize(n_r, n_t);
    fill_iid(c.h, std::sqrt(0.5 / double(n_r)), rng);
    return c;
}

ChannelRealization gen_kronecker(std::uint32_t n_r, std::uint32_t n_t, double rho_r,
                                 double rho_t, RngStream& rng) {
    require_rho(rho_r, "rho_r");
    require_rho(rho_t, "rho_t");
    ChannelRealization c = gen_iid_gaussian(n_r, n_t, rng);
    if (rho_r == 0.0 && rho_t == 0.0) return c; // identity square roots
    const RealMatrix sr = correlation_sqrt(n_r, rho_r);
    const RealMatrix st = correlation_sqrt(n_t, rho_t);
    c.h = (sr.cast<CplxScalar>() * c.h * st.cast<CplxScalar>()).eval();
    return c;
}

ChannelGrid gen_correlated_grid(std::uint32_t n_r, std::uint32_t n_t, std::uint32_t f_count,
                                std::uint32_t t_count, double rho_r, double rho_t,
                                double corr_f, double corr_t, RngStream& rng) {
    if (f_count < 1 || t_count < 1) {
        throw ContractError("gen_correlated_grid: f_count and t_count must be >= 1");
    }
    if (!(corr_f >= 0.0 && corr_f < 1.0) || !(corr_t >= 0.0 && corr_t < 1.0)) {
        throw ContractError("gen_correlated_grid: corr_f and corr_t must lie in [0, 1)");
    }
    require_rho(rho_r, "rho_r");
    require_rho(rho_t, "rho_t");

    const double sd = std::sqrt(0.5 / double(n_r));
    std::vector<CplxMatrix> w(std::size_t(f_count) * t_count);
    for (auto& m : w) {
        m.resize(n_r, n_t);
        fill_iid(m, sd, rng);
    }
    auto at = [&](std::uint32_t f, std::uint32_t t) -> CplxMatrix& {
        return w[std::size_t(f) * t_count + t];
    };
    // First-order Gauss-Markov mixing preserves the unit marginal variance
    // exactly: x_k = c x_{k-1} + sqrt(1 - c^2) fresh_k with x_0 = fresh_0.
    const double st = std::sqrt(1.0 - corr_t * corr_t);
    for (std::uint32_t f = 0; f < f_count; ++f) {
        for (std::uint32_t t = 1; t < t_count; ++t) {
            at(f, t) = corr_t * at(f, t - 1) + st * at(f, t);
        }
    }
    const double sf = std::sqrt(1.0 - corr_f * corr_f);
    for (std::uint32_t f = 1; f < f_count; ++f) {
        for (std::uint32_t t = 0; t < t_count; ++t) {
            at(f, t) = corr_f * at(f - 1, t) + sf * at(f, t);
        }
    }

    const bool shaped = rho_r != 0.0 || rho_t != 0.0;
    CplxMatrix sr, stm;
    if (shaped) {
        sr = correlation_sqrt(n_r, rho_r).cast<CplxScalar>();
        stm = correlation_sqrt(n_t, rho_t).cast<CplxScalar>();
    }

    ChannelGrid grid;
    grid.f_count = f_count;
    grid.t_count = t_count;
    grid.cells.resize(std::size_t(f_count) * t_count);
    double total_sq = 0.0;
    for (std::uint32_t f = 0; f < f_count; ++f) {
        for (std::uint32_t t = 0; t < t_count; ++t) {
            ChannelRealization& cell = grid.cell(f, t);
            cell.freq_index = f;
            cell.time_index = t;
            cell.h = shaped ? CplxMatrix(sr * at(f, t) * stm) : at(f, t);
            total_sq += cell.h.squaredNorm();
        }
    }
    if (!(total_sq > 0.0)) throw NumericalError("gen_correlated_grid: zero-power grid");
    const double scale = std::sqrt(double(f_count) * t_count * n_r * n_t / total_sq);
    for (auto& cell : grid.cells) cell.h *= scale;
    return grid;
}

double sigma2_from_snr(const CplxMatrix& h, double snr_db) {
    return h.squaredNorm() / (double(h.rows()) * std::pow(10.0, snr_db / 10.0));
}

CplxVector apply_channel(const CplxMatrix& h, const CplxVector& x, double sigma2,
                         RngStream& rng) {
    if (x.size() != h.cols()) throw ContractError("apply_channel: x length != H cols");
    if (sigma2 < 0.0) throw ContractError("apply_channel: sigma2 must be >= 0");
    CplxVector y = h * x;
    const double sd = std::sqrt(sigma2 / 2.0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y(i) += CplxScalar(rng.gaussian() * sd, rng.gaussian() * sd);
    }
    return y;
}

double grid_correlation(const ChannelGrid& grid, GridAxis axis, std::uint32_t step) {
    const std::uint32_t len = axis == GridAxis::freq ? grid.f_count : grid.t_count;
    if (step >= len) throw ContractError("grid_correlation: step must be < axis length");
    double acc = 0.0;
    std::size_t count = 0;
    const std::uint32_t other = axis == GridAxis::freq ? grid.t_count : grid.f_count;
    for (std::uint32_t a = 0; a + step < len; ++a) {
        for (std::uint32_t o = 0; o < other; ++o) {
            const CplxMatrix& ha = axis == GridAxis::freq ? grid.cell(a, o).h : grid.cell(o, a).h;
            const CplxMatrix& hb = axis == GridAxis::freq ? grid.cell(a + step, o).h
                                                          : grid.cell(o, a + step).h;
            const double na = ha.norm(), nb = hb.norm();
            if (na == 0.0 || nb == 0.0) {
                throw NumericalError("grid_correlation: zero-norm cell");
            }
            acc += std::abs((ha.conjugate().cwiseProduct(hb)).sum()) / (na * nb);
            ++count;
        }
    }
    return acc / double(count);
}

// ---------------------------------------------------------------------------
// MCHAN1 serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[6] = {'M', 'C', 'H', 'A', 'N', '1'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(char(v & 0xFF));
    out.push_back(char((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xFF));
}

class Reader {
public:
    Reader(const std::string& bytes) : bytes_(bytes) {}

    std::uint64_t offset() const { return pos_; }

    void need(std::size_t n, const char* what) {
        if (pos_ + n > bytes_.size()) {
            throw FormatError(std::string("MCHAN1: truncated while reading ") + what, pos_);
        }
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = std::uint16_t(std::uint8_t(bytes_[pos_])) |
                          std::uint16_t(std::uint8_t(bytes_[pos_ + 1])) << 8;
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }
    void expect_magic() {
        need(6, "magic");
        if (std::memcmp(bytes_.data(), kMagic, 6) != 0) {
            throw FormatError("MCHAN1: bad magic", 0);
        }
        pos_ += 6;
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::uint64_t pos_ = 0;
};

} // namespace

void save_grid(const ChannelGrid& grid, const std::string& path) {
    if (grid.cells.empty()) throw ContractError("save_grid: empty grid");
    const std::uint32_t n_r = grid.n_r(), n_t = grid.n_t();
    std::string out;
    out.reserve(24 + std::size_t(grid.cells.size()) * n_r * n_t * 16);
    out.append(kMagic, 6);
    put_u16(out, kVersion);
    put_u32(out, n_r);
    put_u32(out, n_t);
    put_u32(out, grid.f_count);
    put_u32(out, grid.t_count);
    for (std::uint32_t t = 0; t < grid.t_count; ++t) {
        for (std::uint32_t f = 0; f < grid.f_count; ++f) {
            const CplxMatrix& h = grid.cell(f, t).h;
            if (h.rows() != n_r || h.cols() != n_t) {
                throw ContractError("save_grid: cells disagree on dimensions");
            }
            for (Eigen::Index i = 0; i < h.rows(); ++i) {
                for (Eigen::Index j = 0; j < h.cols(); ++j) {
                    put_f64(out, h(i, j).real());
                    put_f64(out, h(i, j).imag());
                }
            }
        }
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("save_grid: cannot open " + path + " for writing");
    file.write(out.data(), std::streamsize(out.size()));
    if (!file) throw Error("save_grid: write failed for " + path);
}

ChannelGrid load_grid(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error("load_grid: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    Reader r(bytes);
    r.expect_magic();
    const std::uint64_t version_off = r.offset();
    const std::uint16_t version = r.u16("version");
    if (version != kVersion) {
        throw FormatError("MCHAN1: unsupported version " + std::to_string(version), version_off);
    }
    const std::uint64_t nr_off = r.offset();
    const std::uint32_t n_r = r.u32("N_r");
    const std::uint32_t n_t = r.u32("N_t");
    const std::uint64_t f_off = r.offset();
    const std::uint32_t f_count = r.u32("F");
    const std::uint32_t t_count = r.u32("T");
    if (n_t < 1 || n_r < n_t) {
        throw FormatError("MCHAN1: invalid dimensions (need N_r >= N_t >= 1)", nr_off);
    }
    if (f_count < 1 || t_count < 1) {
        throw FormatError("MCHAN1: invalid grid shape (need F, T >= 1)", f_off);
    }

    ChannelGrid grid;
    grid.f_count = f_count;
    grid.t_count = t_count;
    grid.cells.resize(std::size_t(f_count) * t_count);
    for (std::uint32_t t = 0; t < t_count; ++t) {
        for (std::uint32_t f = 0; f < f_count; ++f) {
            ChannelRealization& cell = grid.cell(f, t);
            cell.freq_index = f;
            cell.time_index = t;
            cell.h.resize(n_r, n_t);
            for (std::uint32_t i = 0; i < n_r; ++i) {
                for (std::uint32_t j = 0; j < n_t; ++j) {
                    const double re = r.f64("entry");
                    const double im = r.f64("entry");
                    cell.h(i, j) = CplxScalar(re, im);
                }
            }
        }
    }
    if (!r.at_end()) {
        throw FormatError("MCHAN1: trailing bytes after grid data", r.offset());
    }
    return grid;
}

} // namespace mimo
