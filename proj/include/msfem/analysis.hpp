#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "msfem/cell.hpp"
#include "msfem/coeff.hpp"
#include "msfem/fem.hpp"
#include "msfem/msfem.hpp"

namespace msfem {

/// Refuses fine systems above this many unknowns.
inline constexpr std::size_t kMaxReferenceDofs = 8'000'000;

/// Grid subdivisions n_ref (a power of two) giving spacing <= eps /
/// points_per_period on the longer side of `domain`.
int reference_subdivisions(const Rect& domain, double eps, double points_per_period);

/// Fine P1 solution of -div(A(x / eps) grad u) = f, u = 0 on the boundary, on
/// the n_ref x n_ref structured grid. Throws InvalidArgument above
/// kMaxReferenceDofs.
FeSolve reference_solution(const Rect& domain, const CoefficientField& field, double eps, int n_ref,
                           const VectorSource& f, const SolveOptions& options = {.tol = 1e-8});

/// P1 solution of -div(a_hat grad u0) = f on the n x n grid.
FeSolve homogenized_solution(const Rect& domain, const CoeffTensor& a_hat, int n, const VectorSource& f,
                             const SolveOptions& options = {.tol = 1e-8});

ErrorRecord error_suite(const DiscreteSolution& u_h, const FeFunction& u_ref);

/// Errors of a conforming P1 function on a structured grid nested in the
/// reference grid (energy = H^1 seminorm).
ErrorRecord conforming_errors(const FeFunction& u, const FeFunction& u_ref);

/// Full H^1 norm of u_ref - (u0 + eps chi(x / eps) grad u0), everything on
/// u_ref's mesh.
double first_order_error(const FeFunction& u_ref, const FeFunction& u0_fine, const CorrectorSet& correctors,
                         double eps);
double h1_norm(const FeFunction& u);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  ///< max |fit / data - 1|
};

/// Least squares of log(error) against log(scale). Needs >= 3 points with
/// positive values.
RateFit fit_rate(std::span<const std::pair<double, double>> points);

enum class SweepRule { fix_eps_sweep_h, fix_h_sweep_eps, lock_ratio, pairs };
enum class StudyMode { plain, oversampled, homogenized_p1, fine_p1 };
enum class ErrorNorm { energy_broken, l2, l3_2 };

std::string to_string(SweepRule r);
std::string to_string(StudyMode m);
std::string to_string(ErrorNorm n);

/// Right-hand side descriptor: {kind = "constant", value} or
/// {kind = "sine", amplitude} (amplitude * sin(pi x1) sin(pi x2) in domain
/// coordinates scaled to [0, 1]^2).
VectorSource make_source(const nlohmann::json& descriptor, const Rect& domain, int m);

struct StudyConfig {
    nlohmann::json field_descriptor;
    nlohmann::json source_descriptor = {{"kind", "constant"}, {"value", 1.0}};
    Rect domain = Rect::unit_square();
    SweepRule rule = SweepRule::fix_eps_sweep_h;
    std::vector<double> h_values;
    std::vector<double> eps_values;
    double eps = 0.0;         ///< fix_eps_sweep_h
    double h = 0.0;           ///< fix_h_sweep_eps
    double ratio = 1.0;       ///< lock_ratio: h = ratio * sqrt(eps)
    std::vector<std::pair<double, double>> pairs;  ///< rule = pairs: (h, eps)
    std::vector<StudyMode> modes{StudyMode::oversampled};
    std::vector<ErrorNorm> norms{ErrorNorm::energy_broken, ErrorNorm::l2};
    double dilation = 2.0;
    /// Reference grid spacing <= eps / ref_points_per_period.
    double ref_points_per_period = 16.0;
    int n_cell = 64;
    int workers = 1;
    std::filesystem::path cache_dir;
    std::uint64_t seed = 0x5eed;

    /// (h, eps) cells in sweep order.
    std::vector<std::pair<double, double>> cells() const;
};

/// Validates keys and values; throws ConfigError.
StudyConfig study_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct StudyRow {
    double h = 0.0;
    double eps = 0.0;
    StudyMode mode = StudyMode::oversampled;
    ErrorNorm norm = ErrorNorm::energy_broken;
    double error = 0.0;
    int iters = 0;
    double seconds = 0.0;
};

struct StudyFit {
    StudyMode mode;
    ErrorNorm norm;
    std::string regime;  ///< "h" or "eps"
    int points = 0;
    RateFit fit;
};

struct CellFailure {
    double h;
    double eps;
    StudyMode mode;
    std::string message;
};

struct RateReport {
    SweepRule rule = SweepRule::fix_eps_sweep_h;
    std::vector<StudyRow> rows;  ///< sorted by mode, norm, eps, h
    std::vector<StudyFit> fits;
    std::map<StudyMode, bool> resonance;  ///< energy-norm V-shape per mode
    std::vector<CellFailure> failures;
    std::map<double, int> reference_subdivisions;  ///< per eps

    bool complete() const { return failures.empty(); }
    bool any_resonance() const;
    std::optional<double> error(StudyMode mode, ErrorNorm norm, double h, double eps) const;
    const StudyFit* find_fit(StudyMode mode, ErrorNorm norm) const;
};

/// V-shape test on (h, error) at fixed eps: the error at h ~ eps exceeds the
/// errors at h ~ 4 eps and (when present) h ~ eps / 4, and the minimum over the
/// sweep is attained strictly inside it.
bool detect_resonance(std::vector<std::pair<double, double>> h_error, double eps);

RateReport run_study(const StudyConfig& config);

/// `h,eps,mode,norm,error,iters,seconds`
void write_report_csv(std::ostream& out, const RateReport& report);
nlohmann::json report_json(const RateReport& report);
/// Log-log plot of error against the sweep variable for one norm, one
/// polyline per mode.
std::string report_svg(const RateReport& report, ErrorNorm norm);

}  // namespace msfem
