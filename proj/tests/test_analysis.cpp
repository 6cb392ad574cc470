#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "msfem/analysis.hpp"
#include "msfem/config.hpp"

using namespace msfem;

namespace {

const VectorSource kOne = [](Point2, std::span<double> out) { out[0] = 1.0; };
const VectorSource kZero = [](Point2, std::span<double> out) { out[0] = 0.0; };

// Double sine series of -lap u = 1 on the unit square, zero boundary values.
double poisson_series(double x, double y, int terms) {
    const double pi = std::numbers::pi;
    double s = 0.0;
    for (int a = 1; a <= terms; a += 2)
        for (int b = 1; b <= terms; b += 2)
            s += 16.0 / (std::pow(pi, 4) * a * b * (a * a + b * b)) * std::sin(a * pi * x) * std::sin(b * pi * y);
    return s;
}

nlohmann::json constant_field_json() { return CoefficientField::constant(CoeffTensor::identity(1)).to_json(); }

}  // namespace

TEST(FitRate, PowerLaws) {
    std::vector<std::pair<double, double>> lin, quad;
    for (double h : {0.5, 0.25, 0.125, 0.0625}) {
        lin.push_back({h, 3.0 * h});
        quad.push_back({h, 0.7 * h * h});
    }
    EXPECT_NEAR(fit_rate(lin).slope, 1.0, 1e-12);
    EXPECT_NEAR(fit_rate(quad).slope, 2.0, 1e-12);
    EXPECT_NEAR(fit_rate(quad).residual, 0.0, 1e-12);
}

TEST(FitRate, NoisyData) {
    const std::vector<std::pair<double, double>> p{{0.25, 1e-1}, {0.125, 2.6e-2}, {0.0625, 6.2e-3}};
    const auto fit = fit_rate(p);
    // Two-point slopes are log2(1e-1 / 2.6e-2) and log2(2.6e-2 / 6.2e-3).
    const double s1 = std::log2(1e-1 / 2.6e-2), s2 = std::log2(2.6e-2 / 6.2e-3);
    EXPECT_NEAR(fit.slope, 0.5 * (s1 + s2), 1e-12);  // equal spacing in log h
    EXPECT_NEAR(fit.slope, 2.0, 0.05);
}

TEST(FitRate, RejectsTooFewOrNonPositive) {
    const std::vector<std::pair<double, double>> two{{0.5, 1.0}, {0.25, 0.5}};
    EXPECT_THROW(fit_rate(two), InvalidArgument);
    const std::vector<std::pair<double, double>> zero{{0.5, 1.0}, {0.25, 0.0}, {0.125, 0.1}};
    EXPECT_THROW(fit_rate(zero), InvalidArgument);
}

TEST(Reference, SubdivisionsArePowersOfTwo) {
    EXPECT_EQ(reference_subdivisions(Rect::unit_square(), 1.0 / 64, 16), 1024);
    EXPECT_EQ(reference_subdivisions(Rect::unit_square(), 0.1, 16), 256);
    EXPECT_EQ(reference_subdivisions(Rect::unit_square(), 0.25, 4), 16);
}

TEST(Reference, PoissonCenterValue) {
    const auto u = reference_solution(Rect::unit_square(), CoefficientField::constant(CoeffTensor::identity(1)), 1.0,
                                      128, kOne);
    const double oracle = poisson_series(0.5, 0.5, 399);
    EXPECT_NEAR(oracle, 0.07367, 1e-4);
    EXPECT_NEAR(evaluate(u.u, {0.5, 0.5}), oracle, 2e-3);
}

TEST(Reference, ZeroLoadGivesZero) {
    const auto u = reference_solution(Rect::unit_square(), CoefficientField::laminate(1.0, 4.0), 0.125, 32, kZero);
    for (double v : u.u.values) EXPECT_EQ(v, 0.0);
}

TEST(Reference, MemoryGuard) {
    try {
        reference_solution(Rect::unit_square(), CoefficientField::laminate(1.0, 4.0), 1e-3, 4096, kOne);
        FAIL() << "expected InvalidArgument";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("limit"), std::string::npos);
    }
}

TEST(ConformingErrors, HolderOnUnitSquare) {
    const auto field = CoefficientField::constant(CoeffTensor::identity(1));
    const auto ref = reference_solution(Rect::unit_square(), field, 1.0, 64, kOne);
    const auto coarse = homogenized_solution(Rect::unit_square(), CoeffTensor::identity(1), 8, kOne);
    const auto e = conforming_errors(coarse.u, ref.u);
    EXPECT_GT(e.l2, 0.0);
    EXPECT_LE(e.l3_2, e.l2 * (1 + 1e-12));  // |D| = 1
    EXPECT_GT(e.energy_broken, e.l2);
    const auto self = conforming_errors(ref.u, ref.u);
    EXPECT_EQ(self.energy_broken, 0.0);
}

TEST(ConformingErrors, RejectsNonNestedGrids) {
    const auto field = CoefficientField::constant(CoeffTensor::identity(1));
    const auto ref = reference_solution(Rect::unit_square(), field, 1.0, 16, kOne);
    const auto coarse = homogenized_solution(Rect::unit_square(), CoeffTensor::identity(1), 6, kOne);
    EXPECT_THROW(conforming_errors(coarse.u, ref.u), InvalidArgument);
}

TEST(Resonance, VShapeDetected) {
    const double eps = 1.0 / 64;
    std::vector<std::pair<double, double>> v, mono;
    for (int k = 1; k <= 7; ++k) {
        const double h = 1.0 / (1 << k);
        // error ~ h + eps / h, minimum near h = sqrt(eps) = 1/8, peak toward h = eps
        v.push_back({h, h + (h > eps / 1.5 ? eps / h : 0.5 * h / eps)});
        mono.push_back({h, h});
    }
    EXPECT_TRUE(detect_resonance(v, eps));
    EXPECT_FALSE(detect_resonance(mono, eps));
    EXPECT_FALSE(detect_resonance({{0.5, 1.0}, {0.25, 0.5}}, eps));
}

TEST(StudyConfig, Validation) {
    auto base = nlohmann::json::parse(R"({"sweep":{"rule":"fix_eps_sweep_h","eps":0.25,"h":[0.5,0.25]}})");
    base["field"] = constant_field_json();
    const auto c = study_config_from_json(base);
    EXPECT_EQ(c.cells().size(), 2u);
    EXPECT_EQ(c.rule, SweepRule::fix_eps_sweep_h);

    auto empty = base;
    empty["sweep"]["h"] = nlohmann::json::array();
    EXPECT_THROW(study_config_from_json(empty), ConfigError);
    auto unknown = base;
    unknown["sweeps"] = 1;
    EXPECT_THROW(study_config_from_json(unknown), ConfigError);
    auto bad_mode = base;
    bad_mode["modes"] = {"oversample"};
    EXPECT_THROW(study_config_from_json(bad_mode), ConfigError);
    auto negative = base;
    negative["sweep"]["h"] = {0.5, -0.25};
    EXPECT_THROW(study_config_from_json(negative), ConfigError);
}

TEST(StudyConfig, LockRatio) {
    auto j = nlohmann::json::parse(R"({"sweep":{"rule":"lock_ratio","eps":[0.0625,0.015625],"ratio":1.0}})");
    j["field"] = constant_field_json();
    const auto cells = study_config_from_json(j).cells();
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_DOUBLE_EQ(cells[0].first, 0.25);
    EXPECT_DOUBLE_EQ(cells[1].first, 0.125);
}

TEST(RunStudy, ConstantFieldClassicalRates) {
    auto j = nlohmann::json::parse(R"({
        "sweep": {"rule": "fix_eps_sweep_h", "eps": 0.25, "h": [0.25, 0.125, 0.0625]},
        "modes": ["fine_p1", "plain"],
        "norms": ["energy_broken", "L2"],
        "source": {"kind": "sine", "amplitude": 1.0}
    })");
    j["field"] = constant_field_json();
    const auto report = run_study(study_config_from_json(j));
    ASSERT_TRUE(report.complete());
    EXPECT_EQ(report.rows.size(), 12u);
    const auto* energy = report.find_fit(StudyMode::fine_p1, ErrorNorm::energy_broken);
    const auto* l2 = report.find_fit(StudyMode::fine_p1, ErrorNorm::l2);
    ASSERT_NE(energy, nullptr);
    ASSERT_NE(l2, nullptr);
    EXPECT_NEAR(energy->fit.slope, 1.0, 0.15);
    EXPECT_NEAR(l2->fit.slope, 2.0, 0.25);
    // With A = I the multiscale basis is the P1 basis.
    for (double h : {0.25, 0.125, 0.0625}) {
        const double a = *report.error(StudyMode::fine_p1, ErrorNorm::energy_broken, h, 0.25);
        const double b = *report.error(StudyMode::plain, ErrorNorm::energy_broken, h, 0.25);
        EXPECT_NEAR(a, b, 1e-6 * a);
    }
    std::ostringstream csv;
    write_report_csv(csv, report);
    EXPECT_EQ(csv.str().rfind("h,eps,mode,norm,error,iters,seconds\n", 0), 0u);
    const auto js = report_json(report);
    EXPECT_TRUE(js["complete"].get<bool>());
    EXPECT_NE(report_svg(report, ErrorNorm::l2).find("<svg"), std::string::npos);
}

TEST(RunStudy, FailedCellIsRecorded) {
    auto j = nlohmann::json::parse(R"({
        "sweep": {"rule": "fix_eps_sweep_h", "eps": 0.25, "h": [0.25, 0.3]},
        "modes": ["fine_p1"]
    })");
    j["field"] = constant_field_json();
    const auto report = run_study(study_config_from_json(j));
    EXPECT_FALSE(report.complete());
    ASSERT_EQ(report.failures.size(), 1u);
    EXPECT_DOUBLE_EQ(report.failures[0].h, 0.3);
    EXPECT_TRUE(report.error(StudyMode::fine_p1, ErrorNorm::l2, 0.25, 0.25).has_value());
}
