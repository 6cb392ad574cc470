// msfem_lab: cell problems, single solves and convergence studies.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "msfem/analysis.hpp"
#include "msfem/cell.hpp"
#include "msfem/config.hpp"
#include "msfem/msfem.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace msfem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct Options {
    std::string config;
    std::string out = "out";
    int workers = 1;
    std::string cache;
    std::uint64_t seed = 0x5eed;
    bool seed_set = false;
    bool no_plot = false;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Records every emitted file and writes manifest.json last.
class Manifest {
public:
    Manifest(std::string command, const Options& opt, const json& config)
        : command_(std::move(command)), out_(opt.out), started_(utc_now()) {
        j_["command"] = command_;
        j_["tool_version"] = kToolVersion;
        j_["config_hash"] = hex(config_hash(config));
        j_["inputs"] = {{"config_path", opt.config}, {"config", config}, {"seed", opt.seed}};
    }

    fs::path file(const std::string& name) {
        outputs_.push_back(name);
        return out_ / name;
    }

    void input(const std::string& key, json value) { j_["inputs"][key] = std::move(value); }

    void write(int exit_code) {
        j_["started"] = started_;
        j_["finished"] = utc_now();
        j_["exit_code"] = exit_code;
        outputs_.push_back("manifest.json");
        j_["outputs"] = outputs_;
        std::ofstream(out_ / "manifest.json") << j_.dump(2) << '\n';
    }

private:
    std::string command_;
    fs::path out_;
    std::string started_;
    std::vector<std::string> outputs_;
    json j_;
};

fs::path cache_dir(const Options& opt, const json& config) {
    if (!opt.cache.empty()) return opt.cache;
    if (config.contains("cache")) return get_string(config, "cache", "");
    if (const char* env = std::getenv("MSFEM_CACHE")) return env;
    return {};
}

fs::path base_dir(const Options& opt) { return fs::absolute(opt.config).parent_path(); }

json tensor_json(const CoeffTensor& t) {
    json rows = json::array();
    for (int r = 0; r < t.dm; ++r) {
        json row = json::array();
        for (int c = 0; c < t.dm; ++c) row.push_back(t(r, c));
        rows.push_back(row);
    }
    return rows;
}

int cmd_cell(const Options& opt, const json& cfg) {
    json field_desc = cfg.contains("kind") ? cfg : json();
    int n_cell = 64;
    if (field_desc.is_null()) {
        require_known_keys(cfg, {"field", "n_cell", "seed", "cache"}, "cell");
        if (!cfg.contains("field")) throw ConfigError("cell: missing 'field'");
        field_desc = cfg.at("field");
        n_cell = get_int(cfg, "n_cell", n_cell);
    }
    if (n_cell < 4) throw ConfigError("n_cell: must be at least 4");
    const auto field = CoefficientField::from_json(field_desc, base_dir(opt));

    Manifest manifest("cell", opt, cfg);
    const auto bounds = check_ellipticity(field, 1024, 64, opt.seed);
    const auto chi = solve_corrector(field, n_cell);
    const auto a_hat = homogenized_tensor(field, chi);
    const int m = field.m();

    std::cout << "a_hat";
    for (int r = 0; r < a_hat.value.dm; ++r)
        for (int c = 0; c < a_hat.value.dm; ++c) std::cout << ' ' << a_hat.value(r, c);
    std::cout << '\n';

    {
        std::ofstream out(manifest.file("homogenized.csv"));
        write_homogenized_csv(out, a_hat, m);
    }
    {
        std::ofstream out(manifest.file("correctors.csv"));
        write_correctors_csv(out, chi);
    }
    json diag;
    diag["n_cell"] = n_cell;
    diag["lambda"] = bounds.lambda;
    diag["Lambda"] = bounds.Lambda;
    diag["residual"] = chi.residual;
    diag["max_abs"] = corrector_max_abs(chi);
    diag["a_hat"] = tensor_json(a_hat.value);
    double worst_mean = 0.0;
    json grads = json::array();
    for (int j = 0; j < kDim; ++j)
        for (int b = 0; b < m; ++b) {
            for (int g = 0; g < m; ++g) worst_mean = std::max(worst_mean, std::abs(corrector_mean(chi, j, b, g)));
            grads.push_back({{"j", j}, {"beta", b}, {"grad_l2", corrector_gradient_norm(chi, j, b)}});
        }
    diag["max_abs_mean"] = worst_mean;
    diag["gradient_norms"] = grads;
    std::ofstream(manifest.file("cell_diagnostics.json")) << diag.dump(2) << '\n';
    manifest.write(0);
    return 0;
}

int cmd_solve(const Options& opt, const json& cfg) {
    require_known_keys(cfg,
                       {"field", "source", "domain", "eps", "h", "mode", "dilation", "ref_points_per_period",
                        "reference", "seed", "cache", "workers"},
                       "solve");
    if (!cfg.contains("field")) throw ConfigError("solve: missing 'field'");
    const auto field = CoefficientField::from_json(cfg.at("field"), base_dir(opt));
    Rect domain = Rect::unit_square();
    if (cfg.contains("domain")) {
        const auto& d = cfg.at("domain");
        if (!d.is_array() || d.size() != 4) throw ConfigError("domain: expected [x0, y0, x1, y1]");
        domain = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>(), d[3].get<double>()};
    }
    const json source = cfg.contains("source") ? cfg.at("source") : json{{"kind", "constant"}, {"value", 1.0}};
    const VectorSource f = make_source(source, domain, field.m());
    const double eps = get_number(cfg, "eps", 0.0);
    const double h = get_number(cfg, "h", 0.0);
    if (!(eps > 0.0) || !(h > 0.0)) throw ConfigError("solve: 'eps' and 'h' must be positive");
    const BasisMode mode = [&] {
        try {
            return basis_mode_from_string(get_string(cfg, "mode", "oversampled"));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("mode: ") + e.what());
        }
    }();
    const double ppp = get_number(cfg, "ref_points_per_period", 16.0);
    const int n = static_cast<int>(std::lround(domain.width() / h));
    if (n < 1 || std::abs(domain.width() / n - h) > 1e-9 * h)
        throw ConfigError("solve: h must divide the domain width");
    if (std::abs(domain.height() - domain.width()) > 1e-12 * domain.width())
        throw ConfigError("solve: the domain must be a square");
    int n_ref = std::max(reference_subdivisions(domain, eps, ppp), n);
    if (n_ref % n != 0 || ((n_ref / n) & (n_ref / n - 1)) != 0)
        throw ConfigError("solve: the coarse grid must be a power-of-two coarsening of the fine grid");
    const bool with_reference = cfg.contains("reference") && cfg.at("reference").get<bool>();

    Manifest manifest("solve", opt, cfg);
    check_ellipticity(field, 1024, 64, opt.seed);

    const double ratio = h / eps;
    const bool resonance = field.kind() != FieldKind::constant && ratio >= 0.5 && ratio <= 2.0;
    if (resonance) {
        std::cerr << "warning: resonance regime, h / eps = " << ratio
                  << "; the eps / h error term is of order one\n";
    }

    auto coarse = std::make_shared<const Mesh>(build_structured_triangulation(domain, n));
    BasisOptions bo;
    bo.fine_spacing = domain.width() / n_ref;
    bo.dilation = get_number(cfg, "dilation", 2.0);
    bo.workers = opt.workers;
    bool hit = false;
    const auto t0 = std::chrono::steady_clock::now();
    auto basis = cached_basis(cache_dir(opt, cfg), mode, coarse, domain, field, eps, bo, &hit);
    const double basis_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const MsSystem sys = assemble_msfem(*basis, field, eps, f, opt.workers);
    const DiscreteSolution u = solve_msfem(basis, sys);

    const int m = field.m();
    {
        std::ofstream out(manifest.file("coarse_solution.csv"));
        out << "vertex,x,y";
        for (int c = 0; c < m; ++c) out << ",u" << c;
        out << '\n';
        out.precision(17);
        for (std::size_t v = 0; v < coarse->num_vertices(); ++v) {
            out << v << ',' << coarse->vertices[v].x << ',' << coarse->vertices[v].y;
            for (int c = 0; c < m; ++c) out << ',' << u.dofs[v * m + c];
            out << '\n';
        }
    }
    const auto grid = reference_grid_for(*basis);
    const FeFunction fine = prolongate(u, grid);
    {
        std::ofstream out(manifest.file("fine_solution.csv"));
        out << "vertex,x,y";
        for (int c = 0; c < m; ++c) out << ",u" << c;
        out << '\n';
        out.precision(17);
        for (std::size_t v = 0; v < grid->num_vertices(); ++v) {
            out << v << ',' << grid->vertices[v].x << ',' << grid->vertices[v].y;
            for (int c = 0; c < m; ++c) out << ',' << fine.value(v, c);
            out << '\n';
        }
    }

    json report;
    report["mode"] = to_string(mode);
    report["h"] = h;
    report["eps"] = eps;
    report["coarse_subdivisions"] = n;
    report["fine_subdivisions"] = n_ref;
    report["levels"] = basis->levels;
    report["dofs"] = u.dofs.size();
    report["resonance_warning"] = resonance;
    report["cache_hit"] = hit;
    report["basis_seconds"] = basis_seconds;
    report["solver"] = {{"method", u.report.method},
                        {"iterations", u.report.iterations},
                        {"residual", u.report.residual},
                        {"seconds", u.report.seconds}};
    report["broken_h1_norm"] = broken_h1_norm(u);
    if (with_reference) {
        const auto ref = reference_solution(domain, field, eps, n_ref, f);
        const auto e = msfem_errors(u, ref.u);
        report["errors"] = {{"energy_broken", e.energy_broken}, {"L2", e.l2}, {"L3/2", e.l3_2}};
    }
    std::ofstream(manifest.file("solve_report.json")) << report.dump(2) << '\n';
    manifest.write(0);
    return 0;
}

int cmd_study(const Options& opt, const json& cfg) {
    StudyConfig sc = study_config_from_json(cfg, base_dir(opt));
    sc.workers = std::max(1, opt.workers);
    if (opt.seed_set || !cfg.contains("seed")) sc.seed = opt.seed;
    sc.cache_dir = cache_dir(opt, cfg);

    Manifest manifest("study", opt, cfg);
    manifest.input("cache_dir", sc.cache_dir.string());
    const RateReport report = run_study(sc);
    {
        std::ofstream out(manifest.file("study.csv"));
        write_report_csv(out, report);
    }
    json j = report_json(report);
    j["config_hash"] = hex(config_hash(cfg));
    std::ofstream(manifest.file("study.json")) << j.dump(2) << '\n';
    if (!opt.no_plot) {
        for (auto norm : sc.norms) {
            std::string name = to_string(norm);
            for (char& ch : name)
                if (ch == '/') ch = '_';
            std::ofstream(manifest.file("study_" + name + ".svg")) << report_svg(report, norm);
        }
    }
    for (const auto& fit : report.fits) {
        std::cout << "slope " << to_string(fit.mode) << ' ' << to_string(fit.norm) << ' ' << fit.fit.slope << '\n';
    }
    for (const auto& [mode, r] : report.resonance) {
        std::cout << "resonance " << to_string(mode) << ' ' << (r ? "true" : "false") << '\n';
    }
    const int code = report.complete() ? 0 : 1;
    for (const auto& f : report.failures) {
        std::cerr << "cell failed: mode=" << to_string(f.mode) << " h=" << f.h << " eps=" << f.eps << ": "
                  << f.message << '\n';
    }
    manifest.write(code);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiscale finite element lab"};
    app.require_subcommand(1);
    Options opt;
    if (const char* env = std::getenv("MSFEM_CACHE")) opt.cache = env;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "TOML or JSON config")->required();
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--cache", opt.cache, "basis cache directory (default $MSFEM_CACHE)");
        sub->add_option_function<std::uint64_t>(
            "--seed",
            [&](const std::uint64_t& s) {
                opt.seed = s;
                opt.seed_set = true;
            },
            "seed for ellipticity sampling");
        sub->add_flag("--no-plot", opt.no_plot, "skip SVG output");
    };
    auto* cell = app.add_subcommand("cell", "solve the periodic cell problems and print the homogenized tensor");
    auto* solve = app.add_subcommand("solve", "one MsFEM solve");
    auto* study = app.add_subcommand("study", "convergence study over (h, eps)");
    for (auto* s : {cell, solve, study}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    json cfg;
    try {
        cfg = load_config(opt.config);
        fs::create_directories(opt.out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    try {
        if (*cell) return cmd_cell(opt, cfg);
        if (*solve) return cmd_solve(opt, cfg);
        return cmd_study(opt, cfg);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
