#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "msfem/coeff.hpp"
#include "msfem/config.hpp"
#include "msfem/errors.hpp"

using namespace msfem;

TEST(Coeff, ConstantIdentity) {
    const auto f = CoefficientField::constant(CoeffTensor::identity(1));
    const CoeffTensor a = eval_A(f, {12.3, -4.5});
    EXPECT_EQ(a(0, 0), 1.0);
    EXPECT_EQ(a(0, 1), 0.0);
    EXPECT_EQ(a(1, 1), 1.0);
    const CoeffTensor b = eval_A_eps(f, {0.3, 0.4}, 1e-3);
    EXPECT_EQ(b(0, 0), 1.0);
}

TEST(Coeff, LaminateDefinition) {
    const auto f = CoefficientField::laminate(1.0, 4.0);
    EXPECT_EQ(eval_A(f, {0.25, 0.9})(0, 0), 1.0);
    EXPECT_EQ(eval_A(f, {0.75, 0.9})(1, 1), 4.0);
    // x = 0.75, eps = 0.5 -> y1 = 1.5 -> 0.5, second phase
    EXPECT_EQ(eval_A_eps(f, {0.75, 0.0}, 0.5)(0, 0), 4.0);
}

TEST(Coeff, TrigonometricPeak) {
    const auto f = CoefficientField::trigonometric();
    EXPECT_NEAR(eval_A(f, {0.25, 0.25})(0, 0), 3.0, 1e-15);
}

TEST(Coeff, NonPositiveEpsRejected) {
    const auto f = CoefficientField::laminate(1.0, 4.0);
    EXPECT_THROW(eval_A_eps(f, {0.1, 0.1}, 0.0), InvalidArgument);
    EXPECT_THROW(eval_A_eps(f, {0.1, 0.1}, -1.0), InvalidArgument);
}

TEST(Coeff, PeriodicityAllKinds) {
    std::vector<CoeffTensor> cells;
    for (int k = 0; k < 9; ++k) cells.push_back(CoeffTensor::scalar(1.0 + k));
    const std::vector<CoefficientField> fields{
        CoefficientField::laminate(1.0, 4.0), CoefficientField::laminate(1.0, 4.0, 2),
        CoefficientField::checkerboard(1.0, 4.0), CoefficientField::trigonometric(),
        CoefficientField::sampled_grid(3, cells, 1), CoefficientField::laminate(1.0, 3.0, 1, 0.5, 2, 0.3)};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_int_distribution<int> shift(-5, 5);
    for (const auto& f : fields) {
        for (int k = 0; k < 100; ++k) {
            const double eps = 1.0 / 16;
            const Point2 x{u(rng), u(rng)};
            const CoeffTensor a = eval_A_eps(f, x, eps);
            const CoeffTensor b = eval_A_eps(f, {x.x + eps, x.y}, eps);
            const CoeffTensor c = eval_A(f, {x.x / eps + shift(rng), x.y / eps + shift(rng)});
            for (int r = 0; r < f.dm(); ++r) {
                for (int s = 0; s < f.dm(); ++s) {
                    EXPECT_NEAR(a(r, s), b(r, s), 1e-12);
                    EXPECT_NEAR(a(r, s), c(r, s), 1e-12);
                }
            }
            if (f.symmetric()) EXPECT_TRUE(a.is_symmetric(1e-15));
        }
    }
}

TEST(Ellipticity, Identity) {
    const auto b = check_ellipticity(CoefficientField::constant(CoeffTensor::identity(1)), 100, 10);
    EXPECT_NEAR(b.lambda, 1.0, 1e-12);
    EXPECT_NEAR(b.Lambda, 1.0, 1e-12);
}

TEST(Ellipticity, LaminateRange) {
    const auto b = check_ellipticity(CoefficientField::laminate(1.0, 4.0), 100, 10);
    EXPECT_NEAR(b.lambda, 1.0, 1e-12);
    EXPECT_NEAR(b.Lambda, 4.0, 1e-12);
}

TEST(Ellipticity, TrigonometricRange) {
    const auto b = check_ellipticity(CoefficientField::trigonometric(), 10000, 10);
    EXPECT_NEAR(b.lambda, 1.0, 1e-3);
    EXPECT_NEAR(b.Lambda, 3.0, 1e-3);
}

TEST(Ellipticity, RejectsIndefinite) {
    EXPECT_THROW(check_ellipticity(CoefficientField::laminate(-1.0, 4.0), 100, 10), EllipticityError);
}

TEST(Ellipticity, BlockLaminateSystem) {
    // a(y) delta_ij M, M = [[1, c], [c, 1]] -> extremes a_min (1 - c), a_max (1 + c)
    const auto f = CoefficientField::laminate(1.0, 3.0, 1, 0.5, 2, 0.25);
    const auto b = check_ellipticity(f, 100, 4000);
    EXPECT_GE(b.lambda, 0.75 - 1e-12);
    EXPECT_LE(b.Lambda, 3.75 + 1e-12);
    EXPECT_NEAR(b.lambda, 0.75, 5e-2);
    EXPECT_NEAR(b.Lambda, 3.75, 5e-2);
}

TEST(CoeffJson, RoundTripAndHash) {
    const auto f = CoefficientField::laminate(1.0, 4.0, 2, 0.25);
    const auto g = CoefficientField::from_json(f.to_json());
    EXPECT_EQ(f.hash(), g.hash());
    EXPECT_EQ(eval_A(g, {0.1, 0.2})(0, 0), 1.0);
    EXPECT_EQ(eval_A(g, {0.1, 0.3})(0, 0), 4.0);
    EXPECT_NE(f.hash(), CoefficientField::laminate(1.0, 4.0).hash());
}

TEST(CoeffJson, UnknownKeyIsNamed) {
    const auto j = nlohmann::json::parse(R"({"kind":"laminate","a1":1,"a2":4,"directon":1})");
    try {
        CoefficientField::from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("directon"), std::string::npos);
    }
}

TEST(CoeffJson, TomlDescriptor) {
    const auto j = parse_toml("kind = \"laminate\"\na1 = 1.0\na2 = 4.0\ndirection = 1\n");
    const auto f = CoefficientField::from_json(j);
    EXPECT_EQ(f.kind(), FieldKind::laminate);
    EXPECT_EQ(eval_A(f, {0.7, 0.0})(0, 0), 4.0);
}

TEST(CoeffJson, SampledGridCsv) {
    const auto dir = std::filesystem::temp_directory_path() / "msfem_coeff_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "grid.csv");
        for (int k = 0; k < 4; ++k) out << 1.0 + k << ",0,0," << 1.0 + k << "\n";
    }
    const auto f = load_sampled_grid_csv(dir / "grid.csv", 1);
    EXPECT_EQ(eval_A(f, {0.75, 0.25})(0, 0), 2.0);
    EXPECT_EQ(eval_A(f, {0.25, 0.75})(1, 1), 3.0);
    EXPECT_EQ(to_string(f.kind()), "user-sampled-grid");
    std::filesystem::remove_all(dir);
}

TEST(Config, HashStableUnderReordering) {
    const auto a = nlohmann::json::parse(R"({"x":1,"y":{"b":2,"a":[1,2]}})");
    const auto b = nlohmann::json::parse(R"({"y":{"a":[1,2],"b":2},"x":1})");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(nlohmann::json::parse(R"({"x":2})")));
}
