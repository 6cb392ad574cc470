#include "msfem/coeff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "msfem/config.hpp"
#include "msfem/errors.hpp"
#include "msfem/hash.hpp"

namespace msfem {

CoeffTensor CoeffTensor::zero(int m) {
    if (m < 1 || m > kMaxEquations) throw InvalidArgument("CoeffTensor: unsupported m");
    CoeffTensor t;
    t.dm = kDim * m;
    return t;
}

CoeffTensor CoeffTensor::identity(int m) { return scalar(1.0, m); }

CoeffTensor CoeffTensor::scalar(double a, int m) {
    CoeffTensor t = zero(m);
    for (int r = 0; r < t.dm; ++r) t(r, r) = a;
    return t;
}

double CoeffTensor::max_abs() const {
    double v_max = 0.0;
    for (int r = 0; r < dm; ++r)
        for (int c = 0; c < dm; ++c) v_max = std::max(v_max, std::abs((*this)(r, c)));
    return v_max;
}

bool CoeffTensor::is_symmetric(double tol) const {
    for (int r = 0; r < dm; ++r)
        for (int c = r + 1; c < dm; ++c)
            if (std::abs((*this)(r, c) - (*this)(c, r)) > tol) return false;
    return true;
}

std::string to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::constant: return "constant";
        case FieldKind::laminate: return "laminate";
        case FieldKind::checkerboard: return "checkerboard";
        case FieldKind::trigonometric: return "trigonometric";
        case FieldKind::sampled_grid: return "user-sampled-grid";
    }
    return "unknown";
}

double periodic_reduce(double y) {
    const double r = y - std::floor(y);
    return r >= 1.0 ? 0.0 : r;
}

CoefficientField CoefficientField::constant(const CoeffTensor& value) {
    if (value.dm % kDim != 0 || value.dm / kDim < 1 || value.dm / kDim > kMaxEquations) {
        throw InvalidArgument("constant field: tensor size must be 2m x 2m with 1 <= m <= 3");
    }
    CoefficientField f;
    f.kind_ = FieldKind::constant;
    f.m_ = value.dm / kDim;
    f.constant_ = value;
    f.symmetric_ = value.is_symmetric(0.0);
    return f;
}

CoefficientField CoefficientField::laminate(double a1, double a2, int direction, double fraction,
                                            int m, double coupling) {
    if (direction != 1 && direction != 2) throw InvalidArgument("laminate: direction must be 1 or 2");
    if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("laminate: fraction must lie in (0, 1)");
    if (m < 1 || m > 2) throw InvalidArgument("laminate: m must be 1 or 2");
    if (m == 1 && coupling != 0.0) throw InvalidArgument("laminate: coupling requires m = 2");
    CoefficientField f;
    f.kind_ = FieldKind::laminate;
    f.m_ = m;
    f.a1_ = a1;
    f.a2_ = a2;
    f.direction_ = direction;
    f.fraction_ = fraction;
    f.coupling_ = coupling;
    return f;
}

CoefficientField CoefficientField::checkerboard(double a1, double a2) {
    CoefficientField f;
    f.kind_ = FieldKind::checkerboard;
    f.a1_ = a1;
    f.a2_ = a2;
    return f;
}

CoefficientField CoefficientField::trigonometric(double mean, double amplitude) {
    CoefficientField f;
    f.kind_ = FieldKind::trigonometric;
    f.mean_ = mean;
    f.amplitude_ = amplitude;
    return f;
}

CoefficientField CoefficientField::sampled_grid(int n, std::vector<CoeffTensor> cells, int m) {
    if (n < 1) throw InvalidArgument("sampled grid: n must be >= 1");
    if (cells.size() != static_cast<std::size_t>(n) * n) {
        throw InvalidArgument("sampled grid: expected n*n cell tensors");
    }
    CoefficientField f;
    f.kind_ = FieldKind::sampled_grid;
    f.m_ = m;
    f.grid_n_ = n;
    f.symmetric_ = true;
    for (const auto& c : cells) {
        if (c.dm != kDim * m) throw InvalidArgument("sampled grid: tensor size does not match m");
        f.symmetric_ = f.symmetric_ && c.is_symmetric(0.0);
    }
    f.cells_ = std::move(cells);
    return f;
}

bool CoefficientField::is_scalar_isotropic() const {
    switch (kind_) {
        case FieldKind::laminate: return coupling_ == 0.0;
        case FieldKind::checkerboard:
        case FieldKind::trigonometric: return true;
        default: return false;
    }
}

double CoefficientField::eval_scalar(Point2 y) const {
    switch (kind_) {
        case FieldKind::laminate: {
            const double s = periodic_reduce(direction_ == 1 ? y.x : y.y);
            return s < fraction_ ? a1_ : a2_;
        }
        case FieldKind::checkerboard: {
            const bool left = periodic_reduce(y.x) < 0.5;
            const bool low = periodic_reduce(y.y) < 0.5;
            return left == low ? a1_ : a2_;
        }
        case FieldKind::trigonometric: {
            constexpr double two_pi = 2.0 * std::numbers::pi;
            return mean_ + amplitude_ * std::sin(two_pi * periodic_reduce(y.x)) *
                               std::sin(two_pi * periodic_reduce(y.y));
        }
        default: throw InvalidArgument("eval_scalar: field is not scalar isotropic");
    }
}

CoeffTensor CoefficientField::eval(Point2 y) const {
    switch (kind_) {
        case FieldKind::constant: return constant_;
        case FieldKind::sampled_grid: {
            const int i = std::min(static_cast<int>(periodic_reduce(y.x) * grid_n_), grid_n_ - 1);
            const int j = std::min(static_cast<int>(periodic_reduce(y.y) * grid_n_), grid_n_ - 1);
            return cells_[static_cast<std::size_t>(j) * grid_n_ + i];
        }
        case FieldKind::laminate:
            if (m_ == 2) {
                const double a = eval_scalar(y);
                CoeffTensor t = CoeffTensor::zero(2);
                for (int al = 0; al < 2; ++al) {
                    for (int be = 0; be < 2; ++be) {
                        const double mab = (al == be) ? 1.0 : coupling_;
                        for (int i = 0; i < kDim; ++i) t(al * kDim + i, be * kDim + i) = a * mab;
                    }
                }
                return t;
            }
            [[fallthrough]];
        default: return CoeffTensor::scalar(eval_scalar(y), m_);
    }
}

nlohmann::json CoefficientField::to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    switch (kind_) {
        case FieldKind::constant: {
            nlohmann::json rows = nlohmann::json::array();
            for (int r = 0; r < constant_.dm; ++r) {
                nlohmann::json row = nlohmann::json::array();
                for (int c = 0; c < constant_.dm; ++c) row.push_back(constant_(r, c));
                rows.push_back(row);
            }
            j["matrix"] = rows;
            break;
        }
        case FieldKind::laminate:
            j["a1"] = a1_;
            j["a2"] = a2_;
            j["direction"] = direction_;
            j["fraction"] = fraction_;
            j["m"] = m_;
            if (m_ == 2) j["coupling"] = coupling_;
            break;
        case FieldKind::checkerboard:
            j["a1"] = a1_;
            j["a2"] = a2_;
            break;
        case FieldKind::trigonometric:
            j["mean"] = mean_;
            j["amplitude"] = amplitude_;
            break;
        case FieldKind::sampled_grid: {
            j["n"] = grid_n_;
            j["m"] = m_;
            nlohmann::json cells = nlohmann::json::array();
            for (const auto& c : cells_) {
                nlohmann::json flat = nlohmann::json::array();
                for (int r = 0; r < c.dm; ++r)
                    for (int k = 0; k < c.dm; ++k) flat.push_back(c(r, k));
                cells.push_back(flat);
            }
            j["cells"] = cells;
            break;
        }
    }
    return j;
}

namespace {

CoeffTensor tensor_from_flat(const nlohmann::json& flat, int m) {
    CoeffTensor t = CoeffTensor::zero(m);
    if (!flat.is_array() || flat.size() != static_cast<std::size_t>(t.dm * t.dm)) {
        throw ConfigError("tensor entry must hold (2m)^2 numbers");
    }
    for (int r = 0; r < t.dm; ++r)
        for (int c = 0; c < t.dm; ++c) t(r, c) = flat[static_cast<std::size_t>(r * t.dm + c)].get<double>();
    return t;
}

}  // namespace

CoefficientField CoefficientField::from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("field: expected a table");
    const std::string kind = get_string(j, "kind", "");
    try {
        if (kind == "constant") {
            require_known_keys(j, {"kind", "value", "matrix", "m"}, "field");
            if (j.contains("matrix")) {
                const auto& rows = j.at("matrix");
                const auto dm = static_cast<int>(rows.size());
                if (dm % kDim != 0 || dm == 0) throw ConfigError("field: matrix must be 2m x 2m");
                CoeffTensor t = CoeffTensor::zero(dm / kDim);
                for (int r = 0; r < dm; ++r) {
                    if (rows[r].size() != static_cast<std::size_t>(dm)) throw ConfigError("field: matrix must be square");
                    for (int c = 0; c < dm; ++c) t(r, c) = rows[r][c].get<double>();
                }
                return constant(t);
            }
            return constant(CoeffTensor::scalar(get_number(j, "value", 1.0), get_int(j, "m", 1)));
        }
        if (kind == "laminate") {
            require_known_keys(j, {"kind", "a1", "a2", "direction", "fraction", "m", "coupling"}, "field");
            return laminate(get_number(j, "a1", 1.0), get_number(j, "a2", 4.0), get_int(j, "direction", 1),
                            get_number(j, "fraction", 0.5), get_int(j, "m", 1), get_number(j, "coupling", 0.0));
        }
        if (kind == "checkerboard") {
            require_known_keys(j, {"kind", "a1", "a2"}, "field");
            return checkerboard(get_number(j, "a1", 1.0), get_number(j, "a2", 4.0));
        }
        if (kind == "trigonometric") {
            require_known_keys(j, {"kind", "mean", "amplitude"}, "field");
            return trigonometric(get_number(j, "mean", 2.0), get_number(j, "amplitude", 1.0));
        }
        if (kind == "user-sampled-grid") {
            require_known_keys(j, {"kind", "n", "m", "cells", "file"}, "field");
            const int m = get_int(j, "m", 1);
            if (j.contains("file")) {
                std::filesystem::path p = get_string(j, "file", "");
                if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
                return load_sampled_grid_csv(p, m);
            }
            const int n = get_int(j, "n", 0);
            std::vector<CoeffTensor> cells;
            for (const auto& c : j.at("cells")) cells.push_back(tensor_from_flat(c, m));
            return sampled_grid(n, std::move(cells), m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("field: ") + e.what());
    }
    throw ConfigError("field: unknown kind '" + kind + "'");
}

std::uint64_t CoefficientField::hash() const {
    Fnv1a h;
    h.text(to_json().dump());
    return h.digest();
}

CoeffTensor eval_A(const CoefficientField& field, Point2 y) { return field.eval(y); }

CoeffTensor eval_A_eps(const CoefficientField& field, Point2 x, double eps) {
    if (!(eps > 0.0)) throw InvalidArgument("eval_A_eps: eps must be positive");
    return field.eval({x.x / eps, x.y / eps});
}

EllipticityBounds check_ellipticity(const CoefficientField& field, int n_samples, int n_directions,
                                    std::uint64_t seed) {
    if (n_samples < 1 || n_directions < 1) {
        throw InvalidArgument("check_ellipticity: sample counts must be >= 1");
    }
    const int side = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_samples)))));
    const int m = field.m();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;

    // Direction pairs for the rank-one form; coordinate pairs always included.
    std::vector<std::pair<std::array<double, kDim>, std::array<double, kMaxEquations>>> dirs;
    if (m > 1) {
        for (int i = 0; i < kDim; ++i) {
            for (int a = 0; a < m; ++a) {
                std::array<double, kDim> xi{};
                std::array<double, kMaxEquations> eta{};
                xi[i] = 1.0;
                eta[a] = 1.0;
                dirs.emplace_back(xi, eta);
            }
        }
        for (int k = 0; k < n_directions; ++k) {
            std::array<double, kDim> xi{};
            std::array<double, kMaxEquations> eta{};
            double nx = 0.0;
            double ne = 0.0;
            for (auto& v : xi) {
                v = gauss(rng);
                nx += v * v;
            }
            for (int a = 0; a < m; ++a) {
                eta[a] = gauss(rng);
                ne += eta[a] * eta[a];
            }
            for (auto& v : xi) v /= std::sqrt(nx);
            for (int a = 0; a < m; ++a) eta[a] /= std::sqrt(ne);
            dirs.emplace_back(xi, eta);
        }
    }

    EllipticityBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (int sj = 0; sj < side; ++sj) {
        for (int si = 0; si < side; ++si) {
            const Point2 y{static_cast<double>(si) / side, static_cast<double>(sj) / side};
            const CoeffTensor A = field.eval(y);
            if (m == 1) {
                // extreme eigenvalues of the symmetric part
                const double p = A(0, 0);
                const double q = A(1, 1);
                const double r = 0.5 * (A(0, 1) + A(1, 0));
                const double mid = 0.5 * (p + q);
                const double rad = std::hypot(0.5 * (p - q), r);
                b.lambda = std::min(b.lambda, mid - rad);
                b.Lambda = std::max(b.Lambda, mid + rad);
                continue;
            }
            for (const auto& [xi, eta] : dirs) {
                double form = 0.0;
                for (int i = 0; i < kDim; ++i)
                    for (int j = 0; j < kDim; ++j)
                        for (int al = 0; al < m; ++al)
                            for (int be = 0; be < m; ++be) form += A.at(i, j, al, be) * xi[i] * xi[j] * eta[al] * eta[be];
                b.lambda = std::min(b.lambda, form);
                b.Lambda = std::max(b.Lambda, form);
            }
        }
    }
    if (!(b.lambda > 0.0)) {
        std::ostringstream msg;
        msg << "coefficient field " << to_string(field.kind()) << " is not elliptic: sampled lambda = " << b.lambda;
        throw EllipticityError(msg.str());
    }
    return b;
}

CoefficientField load_sampled_grid_csv(const std::filesystem::path& path, int m) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open coefficient grid '" + path.string() + "'");
    std::vector<CoeffTensor> cells;
    std::string line;
    const int dm = kDim * m;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        CoeffTensor t = CoeffTensor::zero(m);
        for (int r = 0; r < dm; ++r) {
            for (int c = 0; c < dm; ++c) {
                if (!(row >> t(r, c))) {
                    throw ConfigError(path.string() + ": each line needs " + std::to_string(dm * dm) + " values");
                }
            }
        }
        cells.push_back(t);
    }
    const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells.size()))));
    if (n < 1 || static_cast<std::size_t>(n) * n != cells.size()) {
        throw ConfigError(path.string() + ": number of tensors is not a perfect square");
    }
    return CoefficientField::sampled_grid(n, std::move(cells), m);
}

}  // namespace msfem
