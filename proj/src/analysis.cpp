#include "msfem/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "msfem/config.hpp"
#include "msfem/errors.hpp"
#include "msfem/parallel.hpp"

namespace msfem {

int reference_subdivisions(const Rect& domain, double eps, double points_per_period) {
    if (!(eps > 0.0) || !(points_per_period > 0.0)) throw InvalidArgument("reference_subdivisions: bad arguments");
    const double side = std::max(domain.width(), domain.height());
    const double target = eps / points_per_period;
    int n = 1;
    while (side / n > target * (1 + 1e-12)) n *= 2;
    return n;
}

FeSolve reference_solution(const Rect& domain, const CoefficientField& field, double eps, int n_ref,
                           const VectorSource& f, const SolveOptions& options) {
    const double dofs = std::pow(static_cast<double>(n_ref) + 1.0, 2) * field.m();
    if (dofs > static_cast<double>(kMaxReferenceDofs)) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "reference solve needs %.0f unknowns (n_ref = %d), above the limit of %zu",
                      dofs, n_ref, kMaxReferenceDofs);
        throw InvalidArgument(msg);
    }
    auto mesh = std::make_shared<const Mesh>(build_structured_triangulation(domain, n_ref));
    return solve_fe(mesh, field, eps, f, zero_boundary_values(*mesh, field.m()), options);
}

FeSolve homogenized_solution(const Rect& domain, const CoeffTensor& a_hat, int n, const VectorSource& f,
                             const SolveOptions& options) {
    auto mesh = std::make_shared<const Mesh>(build_structured_triangulation(domain, n));
    const int m = a_hat.dm / kDim;
    return solve_fe(mesh, CoefficientField::constant(a_hat), std::numeric_limits<double>::infinity(), f,
                    zero_boundary_values(*mesh, m), options);
}

ErrorRecord error_suite(const DiscreteSolution& u_h, const FeFunction& u_ref) { return msfem_errors(u_h, u_ref); }

ErrorRecord conforming_errors(const FeFunction& u, const FeFunction& u_ref) {
    const auto& g = u.mesh->grid;
    const auto& r = u_ref.mesh->grid;
    if (!g || !r || r->nx % g->nx != 0 || r->ny % g->ny != 0) {
        throw InvalidArgument("conforming_errors: grids are not nested");
    }
    if (u.m != u_ref.m) throw InvalidArgument("conforming_errors: component count mismatch");
    FeFunction on_ref(u_ref.mesh, u.m);
    for (std::size_t v = 0; v < u_ref.mesh->num_vertices(); ++v)
        for (int c = 0; c < u.m; ++c) on_ref.values[v * u.m + c] = evaluate(u, u_ref.mesh->vertices[v], c);
    const FeFunction d = difference(on_ref, u_ref);
    return {h1_seminorm(d), l2_norm(d), lp_norm(d, 1.5)};
}

double h1_norm(const FeFunction& u) {
    const double a = h1_seminorm(u);
    const double b = l2_norm(u);
    return std::sqrt(a * a + b * b);
}

double first_order_error(const FeFunction& u_ref, const FeFunction& u0_fine, const CorrectorSet& correctors,
                         double eps) {
    const FeFunction u1 = first_order_approx(u0_fine, correctors, eps, u_ref.mesh);
    return h1_norm(difference(u_ref, u1));
}

RateFit fit_rate(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) throw InvalidArgument("fit_rate: at least 3 points are required");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [s, e] : points) {
        if (!(s > 0.0) || !(e > 0.0)) throw InvalidArgument("fit_rate: scales and errors must be positive");
        const double x = std::log(s), y = std::log(e);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(points.size());
    const double den = n * sxx - sx * sx;
    if (!(std::abs(den) > 0.0)) throw InvalidArgument("fit_rate: scales must not all coincide");
    RateFit out;
    out.slope = (n * sxy - sx * sy) / den;
    out.intercept = (sy - out.slope * sx) / n;
    for (const auto& [s, e] : points) {
        const double fit = std::exp(out.intercept + out.slope * std::log(s));
        out.residual = std::max(out.residual, std::abs(fit / e - 1.0));
    }
    return out;
}

std::string to_string(SweepRule r) {
    switch (r) {
        case SweepRule::fix_eps_sweep_h: return "fix_eps_sweep_h";
        case SweepRule::fix_h_sweep_eps: return "fix_h_sweep_eps";
        case SweepRule::lock_ratio: return "lock_ratio";
        case SweepRule::pairs: return "pairs";
    }
    return "?";
}

std::string to_string(StudyMode m) {
    switch (m) {
        case StudyMode::plain: return "plain";
        case StudyMode::oversampled: return "oversampled";
        case StudyMode::homogenized_p1: return "homogenized_p1";
        case StudyMode::fine_p1: return "fine_p1";
    }
    return "?";
}

std::string to_string(ErrorNorm n) {
    switch (n) {
        case ErrorNorm::energy_broken: return "energy_broken";
        case ErrorNorm::l2: return "L2";
        case ErrorNorm::l3_2: return "L3/2";
    }
    return "?";
}

VectorSource make_source(const nlohmann::json& d, const Rect& domain, int m) {
    if (!d.is_object()) throw ConfigError("source: expected a table");
    const std::string kind = get_string(d, "kind", "constant");
    if (kind == "constant") {
        require_known_keys(d, {"kind", "value"}, "source");
        const double value = get_number(d, "value", 1.0);
        return [value, m](Point2, std::span<double> out) {
            for (int c = 0; c < m; ++c) out[c] = value;
        };
    }
    if (kind == "sine") {
        require_known_keys(d, {"kind", "amplitude"}, "source");
        const double amp = get_number(d, "amplitude", 1.0);
        return [amp, m, domain](Point2 x, std::span<double> out) {
            const double s = (x.x - domain.x0) / domain.width();
            const double t = (x.y - domain.y0) / domain.height();
            const double v = amp * std::sin(std::numbers::pi * s) * std::sin(std::numbers::pi * t);
            for (int c = 0; c < m; ++c) out[c] = v;
        };
    }
    throw ConfigError("source: unknown kind '" + kind + "'");
}

std::vector<std::pair<double, double>> StudyConfig::cells() const {
    std::vector<std::pair<double, double>> out;
    switch (rule) {
        case SweepRule::fix_eps_sweep_h:
            for (double hv : h_values) out.push_back({hv, eps});
            break;
        case SweepRule::fix_h_sweep_eps:
            for (double e : eps_values) out.push_back({h, e});
            break;
        case SweepRule::lock_ratio:
            for (double e : eps_values) out.push_back({ratio * std::sqrt(e), e});
            break;
        case SweepRule::pairs:
            out = pairs;
            break;
    }
    return out;
}

namespace {

std::vector<double> number_list(const nlohmann::json& j, const char* what) {
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number()) throw ConfigError(std::string(what) + ": expected numbers");
            out.push_back(v.get<double>());
        }
    } else {
        throw ConfigError(std::string(what) + ": expected a number or a list of numbers");
    }
    for (double v : out)
        if (!(v > 0.0)) throw ConfigError(std::string(what) + ": values must be positive");
    return out;
}

StudyMode parse_mode(const std::string& s) {
    for (auto m : {StudyMode::plain, StudyMode::oversampled, StudyMode::homogenized_p1, StudyMode::fine_p1})
        if (to_string(m) == s) return m;
    throw ConfigError("modes: unknown mode '" + s + "'");
}

ErrorNorm parse_norm(const std::string& s) {
    for (auto n : {ErrorNorm::energy_broken, ErrorNorm::l2, ErrorNorm::l3_2})
        if (to_string(n) == s) return n;
    throw ConfigError("norms: unknown norm '" + s + "'");
}

}  // namespace

StudyConfig study_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("study config: expected a table");
    require_known_keys(j,
                       {"field", "source", "domain", "sweep", "modes", "norms", "dilation", "ref_points_per_period",
                        "n_cell", "workers", "seed", "cache"},
                       "study");
    StudyConfig c;
    if (!j.contains("field")) throw ConfigError("study: missing 'field'");
    c.field_descriptor = j.at("field");
    CoefficientField::from_json(c.field_descriptor, base_dir);  // validate early
    if (j.contains("source")) c.source_descriptor = j.at("source");
    if (j.contains("domain")) {
        const auto v = j.at("domain");
        if (!v.is_array() || v.size() != 4) throw ConfigError("domain: expected [x0, y0, x1, y1]");
        c.domain = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
        if (!(c.domain.width() > 0.0) || !(c.domain.height() > 0.0))
            throw ConfigError("domain: side lengths must be positive");
    }
    make_source(c.source_descriptor, c.domain, 1);
    if (!j.contains("sweep")) throw ConfigError("study: missing 'sweep'");
    const auto& s = j.at("sweep");
    require_known_keys(s, {"rule", "h", "eps", "ratio", "pairs"}, "sweep");
    const std::string rule = get_string(s, "rule", "fix_eps_sweep_h");
    if (rule == "fix_eps_sweep_h") {
        c.rule = SweepRule::fix_eps_sweep_h;
        if (!s.contains("eps") || !s.contains("h")) throw ConfigError("sweep: fix_eps_sweep_h needs 'eps' and 'h'");
        const auto e = number_list(s.at("eps"), "sweep.eps");
        if (e.size() != 1) throw ConfigError("sweep.eps: a single value is expected for fix_eps_sweep_h");
        c.eps = e[0];
        c.h_values = number_list(s.at("h"), "sweep.h");
    } else if (rule == "fix_h_sweep_eps") {
        c.rule = SweepRule::fix_h_sweep_eps;
        if (!s.contains("eps") || !s.contains("h")) throw ConfigError("sweep: fix_h_sweep_eps needs 'eps' and 'h'");
        const auto hv = number_list(s.at("h"), "sweep.h");
        if (hv.size() != 1) throw ConfigError("sweep.h: a single value is expected for fix_h_sweep_eps");
        c.h = hv[0];
        c.eps_values = number_list(s.at("eps"), "sweep.eps");
    } else if (rule == "lock_ratio") {
        c.rule = SweepRule::lock_ratio;
        if (!s.contains("eps")) throw ConfigError("sweep: lock_ratio needs 'eps'");
        c.eps_values = number_list(s.at("eps"), "sweep.eps");
        c.ratio = get_number(s, "ratio", 1.0);
    } else if (rule == "pairs") {
        c.rule = SweepRule::pairs;
        if (!s.contains("pairs") || !s.at("pairs").is_array()) throw ConfigError("sweep: pairs needs 'pairs'");
        for (const auto& p : s.at("pairs")) {
            if (!p.is_array() || p.size() != 2) throw ConfigError("sweep.pairs: expected [h, eps] entries");
            c.pairs.push_back({p[0].get<double>(), p[1].get<double>()});
        }
    } else {
        throw ConfigError("sweep: unknown rule '" + rule + "'");
    }
    if (c.cells().empty()) throw ConfigError("sweep: empty sweep");
    if (j.contains("modes")) {
        c.modes.clear();
        for (const auto& m : j.at("modes")) c.modes.push_back(parse_mode(m.get<std::string>()));
        if (c.modes.empty()) throw ConfigError("modes: at least one mode is required");
    }
    if (j.contains("norms")) {
        c.norms.clear();
        for (const auto& n : j.at("norms")) c.norms.push_back(parse_norm(n.get<std::string>()));
        if (c.norms.empty()) throw ConfigError("norms: at least one norm is required");
    }
    c.dilation = get_number(j, "dilation", c.dilation);
    if (!(c.dilation >= 1.0)) throw ConfigError("dilation: must be >= 1");
    c.ref_points_per_period = get_number(j, "ref_points_per_period", c.ref_points_per_period);
    if (!(c.ref_points_per_period > 0.0)) throw ConfigError("ref_points_per_period: must be positive");
    c.n_cell = get_int(j, "n_cell", c.n_cell);
    if (c.n_cell < 4) throw ConfigError("n_cell: must be at least 4");
    c.workers = std::max(1, get_int(j, "workers", c.workers));
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("cache")) c.cache_dir = get_string(j, "cache", "");
    return c;
}

bool RateReport::any_resonance() const {
    for (const auto& [m, r] : resonance)
        if (r) return true;
    return false;
}

std::optional<double> RateReport::error(StudyMode mode, ErrorNorm norm, double h, double eps) const {
    for (const auto& r : rows)
        if (r.mode == mode && r.norm == norm && std::abs(r.h - h) <= 1e-12 * h && std::abs(r.eps - eps) <= 1e-12 * eps)
            return r.error;
    return std::nullopt;
}

const StudyFit* RateReport::find_fit(StudyMode mode, ErrorNorm norm) const {
    for (const auto& f : fits)
        if (f.mode == mode && f.norm == norm) return &f;
    return nullptr;
}

bool detect_resonance(std::vector<std::pair<double, double>> h_error, double eps) {
    if (h_error.size() < 3) return false;
    std::sort(h_error.begin(), h_error.end());
    auto near = [&](double target) -> std::optional<double> {
        for (const auto& [h, e] : h_error)
            if (std::abs(std::log(h / target)) <= 0.5 * std::log(2.0)) return e;
        return std::nullopt;
    };
    const auto at_eps = near(eps);
    const auto above = near(4 * eps);
    if (!at_eps || !above || !(*at_eps > *above)) return false;
    const auto below = near(eps / 4);
    if (below && !(*at_eps > *below)) return false;
    std::size_t imin = 0;
    for (std::size_t i = 1; i < h_error.size(); ++i)
        if (h_error[i].second < h_error[imin].second) imin = i;
    return imin > 0 && imin + 1 < h_error.size();
}

namespace {

struct CellResult {
    bool ok = false;
    std::string message;
    ErrorRecord errors;
    int iters = 0;
    double seconds = 0.0;
};

double norm_value(const ErrorRecord& r, ErrorNorm n) {
    switch (n) {
        case ErrorNorm::energy_broken: return r.energy_broken;
        case ErrorNorm::l2: return r.l2;
        case ErrorNorm::l3_2: return r.l3_2;
    }
    return 0.0;
}

int coarse_subdivisions(const Rect& domain, double h) {
    const int n = static_cast<int>(std::lround(domain.width() / h));
    if (n < 1 || std::abs(domain.width() / n - h) > 1e-9 * h) {
        throw InvalidArgument("h does not divide the domain width");
    }
    return n;
}

}  // namespace

RateReport run_study(const StudyConfig& config) {
    const CoefficientField field = CoefficientField::from_json(config.field_descriptor);
    check_ellipticity(field, 1024, 64, config.seed);
    const int m = field.m();
    const VectorSource f = make_source(config.source_descriptor, config.domain, m);
    const auto cells = config.cells();
    if (cells.empty()) throw InvalidArgument("run_study: empty sweep");

    std::optional<HomogenizedTensor> a_hat;
    if (std::find(config.modes.begin(), config.modes.end(), StudyMode::homogenized_p1) != config.modes.end()) {
        a_hat = homogenized_tensor(field, solve_corrector(field, config.n_cell));
    }

    RateReport report;
    report.rule = config.rule;
    std::vector<double> eps_order;
    for (const auto& [h, e] : cells)
        if (std::find(eps_order.begin(), eps_order.end(), e) == eps_order.end()) eps_order.push_back(e);

    struct Task {
        double h, eps;
        StudyMode mode;
    };
    for (double eps : eps_order) {
        const int n_ref = reference_subdivisions(config.domain, eps, config.ref_points_per_period);
        report.reference_subdivisions[eps] = n_ref;
        std::vector<Task> tasks;
        for (const auto& [h, e] : cells)
            if (e == eps)
                for (auto mode : config.modes) tasks.push_back({h, e, mode});
        std::vector<CellResult> results(tasks.size());
        std::optional<FeSolve> ref;
        std::string ref_error;
        try {
            ref = reference_solution(config.domain, field, eps, n_ref, f);
        } catch (const std::exception& ex) {
            ref_error = std::string("reference solve failed: ") + ex.what();
        }
        parallel_for(tasks.size(), config.workers, [&](std::size_t t) {
            const Task& task = tasks[t];
            CellResult& r = results[t];
            if (!ref) {
                r.message = ref_error;
                return;
            }
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const int n = coarse_subdivisions(config.domain, task.h);
                auto coarse = std::make_shared<const Mesh>(build_structured_triangulation(config.domain, n));
                switch (task.mode) {
                    case StudyMode::plain:
                    case StudyMode::oversampled: {
                        BasisOptions opt;
                        opt.fine_spacing = std::max(config.domain.width(), config.domain.height()) / n_ref;
                        opt.dilation = config.dilation;
                        const int levels = levels_for_spacing(*coarse, opt.fine_spacing);
                        if (n * (1 << levels) != n_ref) {
                            throw InvalidArgument("coarse grid is not nested in the reference grid");
                        }
                        const BasisMode bm =
                            task.mode == StudyMode::plain ? BasisMode::plain : BasisMode::oversampled;
                        auto basis = cached_basis(config.cache_dir, bm, coarse, config.domain, field, task.eps, opt);
                        const MsSystem sys = assemble_msfem(*basis, field, task.eps, f);
                        const DiscreteSolution u = solve_msfem(basis, sys);
                        r.errors = error_suite(u, ref->u);
                        r.iters = u.report.iterations;
                        break;
                    }
                    case StudyMode::homogenized_p1: {
                        const FeSolve u0 = homogenized_solution(config.domain, a_hat->value, n, f);
                        r.errors = conforming_errors(u0.u, ref->u);
                        r.iters = u0.report.iterations;
                        break;
                    }
                    case StudyMode::fine_p1: {
                        const FeSolve u = solve_fe(coarse, field, task.eps, f, zero_boundary_values(*coarse, m));
                        r.errors = conforming_errors(u.u, ref->u);
                        r.iters = u.report.iterations;
                        break;
                    }
                }
                r.ok = true;
            } catch (const std::exception& ex) {
                r.message = ex.what();
            }
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        });
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            const CellResult& r = results[t];
            if (!r.ok) {
                report.failures.push_back({tasks[t].h, tasks[t].eps, tasks[t].mode, r.message});
                continue;
            }
            for (auto norm : config.norms)
                report.rows.push_back({tasks[t].h, tasks[t].eps, tasks[t].mode, norm, norm_value(r.errors, norm),
                                       r.iters, r.seconds});
        }
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const StudyRow& a, const StudyRow& b) {
        return std::tie(a.mode, a.norm, a.eps, a.h) < std::tie(b.mode, b.norm, b.eps, b.h);
    });

    const bool constant = field.kind() == FieldKind::constant;
    for (auto mode : config.modes) {
        for (auto norm : config.norms) {
            std::vector<std::pair<double, double>> pts;
            std::vector<std::pair<double, double>> all_h;
            for (const auto& r : report.rows) {
                if (r.mode != mode || r.norm != norm) continue;
                if (config.rule == SweepRule::fix_eps_sweep_h) {
                    all_h.push_back({r.h, r.error});
                    const double ratio = r.h / r.eps;
                    if (!constant && ratio >= 0.5 && ratio <= 2.0) continue;
                    pts.push_back({r.h, r.error});
                } else if (config.rule != SweepRule::pairs) {
                    pts.push_back({r.eps, r.error});
                }
            }
            if (pts.size() >= 3) {
                bool positive = true;
                for (const auto& p : pts) positive = positive && p.second > 0.0;
                if (positive) {
                    report.fits.push_back({mode, norm, config.rule == SweepRule::fix_eps_sweep_h ? "h" : "eps",
                                           static_cast<int>(pts.size()), fit_rate(pts)});
                }
            }
            if (norm == ErrorNorm::energy_broken && config.rule == SweepRule::fix_eps_sweep_h) {
                report.resonance[mode] = detect_resonance(all_h, config.eps);
            }
        }
    }
    return report;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const RateReport& report) {
    out << "h,eps,mode,norm,error,iters,seconds\n";
    for (const auto& r : report.rows) {
        char secs[32];
        std::snprintf(secs, sizeof secs, "%.3f", r.seconds);
        out << num(r.h) << ',' << num(r.eps) << ',' << to_string(r.mode) << ',' << to_string(r.norm) << ','
            << num(r.error) << ',' << r.iters << ',' << secs << '\n';
    }
}

nlohmann::json report_json(const RateReport& report) {
    nlohmann::json j;
    j["rule"] = to_string(report.rule);
    j["complete"] = report.complete();
    j["resonance"] = report.any_resonance();
    nlohmann::json by_mode = nlohmann::json::object();
    for (const auto& [m, r] : report.resonance) by_mode[to_string(m)] = r;
    j["resonance_by_mode"] = by_mode;
    nlohmann::json fits = nlohmann::json::array();
    nlohmann::json slopes = nlohmann::json::object();
    for (const auto& f : report.fits) {
        fits.push_back({{"mode", to_string(f.mode)},
                        {"norm", to_string(f.norm)},
                        {"regime", f.regime},
                        {"points", f.points},
                        {"slope", f.fit.slope},
                        {"residual", f.fit.residual}});
        slopes[to_string(f.mode)][to_string(f.norm)] = f.fit.slope;
    }
    j["fits"] = fits;
    j["slopes"] = slopes;
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : report.failures)
        failures.push_back({{"h", f.h}, {"eps", f.eps}, {"mode", to_string(f.mode)}, {"message", f.message}});
    j["failures"] = failures;
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& [eps, n] : report.reference_subdivisions) refs.push_back({{"eps", eps}, {"n_ref", n}});
    j["reference_grids"] = refs;
    return j;
}

std::string report_svg(const RateReport& report, ErrorNorm norm) {
    const bool by_h = report.rule == SweepRule::fix_eps_sweep_h || report.rule == SweepRule::pairs;
    std::map<StudyMode, std::vector<std::pair<double, double>>> series;
    for (const auto& r : report.rows)
        if (r.norm == norm && r.error > 0.0) series[r.mode].push_back({by_h ? r.h : r.eps, r.error});
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (auto& [m, pts] : series) {
        std::sort(pts.begin(), pts.end());
        for (const auto& [x, y] : pts) {
            xmin = std::min(xmin, std::log10(x));
            xmax = std::max(xmax, std::log10(x));
            ymin = std::min(ymin, std::log10(y));
            ymax = std::max(ymax, std::log10(y));
        }
    }
    if (series.empty()) xmin = -2, xmax = 0, ymin = -2, ymax = 0;
    xmin = std::floor(xmin * 2) / 2;
    xmax = std::ceil(xmax * 2) / 2;
    ymin = std::floor(ymin);
    ymax = std::ceil(ymax);
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    const double W = 640, H = 480, L = 80, R = 160, T = 40, B = 60;
    auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - T - B); };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">error (" << to_string(norm)
      << ") vs " << (by_h ? "h" : "eps") << "</text>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (double d = std::ceil(xmin); d <= xmax + 1e-9; d += 1) {
        s << "<line x1=\"" << px(d) << "\" y1=\"" << H - B << "\" x2=\"" << px(d) << "\" y2=\"" << H - B + 6
          << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << px(d) << "\" y=\"" << H - B + 22 << "\" text-anchor=\"middle\" font-size=\"12\">1e"
          << static_cast<int>(d) << "</text>\n";
    }
    for (double d = ymin; d <= ymax + 1e-9; d += 1) {
        s << "<line x1=\"" << L - 6 << "\" y1=\"" << py(d) << "\" x2=\"" << L << "\" y2=\"" << py(d)
          << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << L - 10 << "\" y=\"" << py(d) + 4 << "\" text-anchor=\"end\" font-size=\"12\">1e"
          << static_cast<int>(d) << "</text>\n";
    }
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"14\">"
      << (by_h ? "h" : "eps") << "</text>\n";
    s << "<text x=\"20\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 20 "
      << (T + H - B) / 2 << ")\">error</text>\n";
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    int k = 0;
    for (const auto& [mode, pts] : series) {
        const char* col = colors[k % 4];
        s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : pts) s << px(std::log10(x)) << ',' << py(std::log10(y)) << ' ';
        s << "\"/>\n";
        for (const auto& [x, y] : pts)
            s << "<circle cx=\"" << px(std::log10(x)) << "\" cy=\"" << py(std::log10(y)) << "\" r=\"3\" fill=\"" << col
              << "\"/>\n";
        s << "<text x=\"" << W - R + 12 << "\" y=\"" << T + 20 + 18 * k << "\" font-size=\"12\" fill=\"" << col << "\">"
          << to_string(mode) << "</text>\n";
        ++k;
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace msfem
