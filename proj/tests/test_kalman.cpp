#include "hakf/error.hpp"
#include "hakf/kalman.hpp"
#include "hakf/motion_model.hpp"
#include "hakf/random.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hakf;
using namespace hakf::kalman;

namespace {

Matrix random_spd(Eigen::Index n, Rng& rng, double floor = 0.1) {
    std::normal_distribution<double> g;
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    return a * a.transpose() + floor * Matrix::Identity(n, n);
}

Matrix cv_h() { return models::make_model(models::ModelKind::CV, 1.0).h; }

double min_eig(const Matrix& p) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    return es.eigenvalues().minCoeff();
}

}  // namespace

TEST(Initialize, IdentityStart) {
    const auto fs = initialize(Vector::Zero(4), Matrix::Identity(4, 4));
    EXPECT_TRUE(fs.x_hat.isZero());
    EXPECT_TRUE(fs.p.isIdentity());
    EXPECT_TRUE(fs.k_gain.isZero());
    EXPECT_EQ(fs.k_gain.rows(), 4);
    EXPECT_EQ(fs.k_gain.cols(), 2);
    EXPECT_TRUE(fs.innovations.empty());
    EXPECT_EQ(fs.innovations.capacity(), kDefaultInnovationWindow);
}

TEST(Initialize, DimensionMismatchThrows) {
    EXPECT_THROW(initialize(Vector::Zero(4), Matrix::Identity(6, 6)), ConfigError);
    EXPECT_THROW(initialize(Vector::Zero(5), Matrix::Identity(5, 5)), ConfigError);
}

TEST(Initialize, RejectsBadCovariance) {
    Matrix asym = Matrix::Identity(4, 4);
    asym(0, 1) = 0.5;
    EXPECT_THROW(initialize(Vector::Zero(4), asym), ConfigError);
    Matrix neg = Matrix::Identity(4, 4);
    neg(2, 2) = -1.0;
    EXPECT_THROW(initialize(Vector::Zero(4), neg), ConfigError);
    Vector x = Vector::Zero(4);
    x(0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(initialize(x, Matrix::Identity(4, 4)), ConfigError);
}

TEST(Initialize, FirstMeasurementPolicyIsValid) {
    const double r = 2.0;
    Vector x0(4);
    x0 << 3.0, -1.0, 0.0, 0.0;
    Matrix p0 = Vector{{r, r, 100.0, 100.0}}.asDiagonal();
    const auto fs = initialize(x0, p0);
    EXPECT_NO_THROW(validate_state(fs.x_hat));
    EXPECT_NO_THROW(validate_covariance(fs.p));
}

TEST(Propagate, IdentityWithZeroQ) {
    Rng rng(1);
    auto fs = initialize(Vector::Random(4), random_spd(4, rng));
    const auto out = propagate(fs, Matrix::Identity(4, 4), Matrix::Zero(4, 4));
    EXPECT_TRUE(out.x_hat.isApprox(fs.x_hat));
    EXPECT_TRUE(out.p.isApprox(fs.p));
}

TEST(Propagate, ConstantVelocityStep) {
    const auto m = models::make_model(models::ModelKind::CV, 1.0);
    Vector x(4);
    x << 0, 0, 1, 2;
    const auto out = propagate(initialize(x, Matrix::Identity(4, 4)), m.phi, Matrix::Zero(4, 4));
    EXPECT_DOUBLE_EQ(out.x_hat(0), 1.0);
    EXPECT_DOUBLE_EQ(out.x_hat(1), 2.0);
    EXPECT_DOUBLE_EQ(out.x_hat(2), 1.0);
    EXPECT_DOUBLE_EQ(out.x_hat(3), 2.0);
}

TEST(Propagate, AdditiveQ) {
    Matrix q = Vector{{0.0, 0.0, 0.04, 0.04}}.asDiagonal();
    const auto out = propagate(initialize(Vector::Zero(4), Matrix::Identity(4, 4)), Matrix::Identity(4, 4), q);
    Matrix expect = Vector{{1.0, 1.0, 1.04, 1.04}}.asDiagonal();
    EXPECT_TRUE(out.p.isApprox(expect, 1e-15));
}

TEST(Propagate, NonFiniteResultIsNumericalError) {
    auto fs = initialize(Vector::Zero(4), Matrix::Identity(4, 4));
    Matrix phi = Matrix::Identity(4, 4) * 1e200;
    try {
        propagate(fs, phi, Matrix::Zero(4, 4));
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_TRUE(e.step().has_value());
    }
}

TEST(Propagate, ShapeAndSignChecks) {
    auto fs = initialize(Vector::Zero(4), Matrix::Identity(4, 4));
    EXPECT_THROW(propagate(fs, Matrix::Identity(6, 6), Matrix::Zero(4, 4)), ConfigError);
    Matrix q = Matrix::Zero(4, 4);
    q(3, 3) = -1.0;
    EXPECT_THROW(propagate(fs, Matrix::Identity(4, 4), q), ConfigError);
}

TEST(Gain, IdentityPrior) {
    const Matrix k = gain(Matrix::Identity(4, 4), cv_h(), Matrix::Identity(2, 2));
    EXPECT_TRUE(k.isApprox(0.5 * cv_h().transpose()));
}

TEST(Gain, ZeroPriorGivesZeroGain) {
    const Matrix k = gain(Matrix::Zero(4, 4), cv_h(), Matrix::Identity(2, 2));
    EXPECT_TRUE(k.isZero());
}

TEST(Gain, MatchesIndependentSolve) {
    Rng rng(7);
    const Matrix h = cv_h();
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix p = random_spd(4, rng);
        const Matrix r = random_spd(2, rng, 0.5);
        const Matrix s = h * p * h.transpose() + r;
        const Matrix oracle = s.transpose().fullPivLu().solve((p * h.transpose()).transpose()).transpose();
        EXPECT_LT((gain(p, h, r) - oracle).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Gain, SingularInnovationCovarianceThrows) {
    EXPECT_THROW(gain(Matrix::Zero(4, 4), cv_h(), Matrix::Zero(2, 2)), NumericalError);
    Matrix r = Matrix::Identity(2, 2);
    r(1, 1) = 1e-14;
    EXPECT_THROW(gain(Matrix::Zero(4, 4), cv_h(), r), NumericalError);
}

TEST(Update, ZeroInnovationLeavesEstimate) {
    Vector x(4);
    x << 1, 2, 3, 4;
    auto fs = initialize(x, Matrix::Identity(4, 4));
    const auto out = update(fs, {Vec2(1, 2), 1}, cv_h(), Matrix::Identity(2, 2));
    EXPECT_TRUE(out.x_hat.isApprox(x));
    EXPECT_TRUE(out.last_innovation.isZero());
    EXPECT_EQ(out.step, 1u);
    EXPECT_EQ(out.innovations.size(), 1u);
}

TEST(Update, TrustedPriorIgnoresMeasurement) {
    Vector x(4);
    x << 1, 2, 3, 4;
    auto fs = initialize(x, Matrix::Zero(4, 4));
    const auto out = update(fs, {Vec2(10, -10), 1}, cv_h(), Matrix::Identity(2, 2));
    EXPECT_TRUE(out.x_hat.isApprox(x));
    EXPECT_TRUE(out.p.isZero());
}

TEST(Update, ScalarPosteriorVariance) {
    Matrix p = Vector{{1.0, 1.0, 0.0, 0.0}}.asDiagonal();
    const auto out = update(initialize(Vector::Zero(4), p), {Vec2(1, 1), 1}, cv_h(), Matrix::Identity(2, 2));
    EXPECT_NEAR(out.p(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(out.p(1, 1), 0.5, 1e-15);
}

TEST(Update, WindowEvictsOldest) {
    auto fs = initialize(Vector::Zero(4), Matrix::Identity(4, 4), 3);
    for (int i = 1; i <= 5; ++i) fs = update(fs, {Vec2(i, 0), static_cast<std::size_t>(i)}, cv_h(), Matrix::Identity(2, 2));
    EXPECT_EQ(fs.innovations.size(), 3u);
    EXPECT_TRUE(fs.innovations.full());
}

TEST(LimitGain, IdentityCase) {
    const Matrix k = limit_gain_q_zero(Matrix::Identity(4, 4), Matrix::Identity(4, 4), cv_h(), Matrix::Identity(2, 2));
    EXPECT_NEAR(k(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(k(1, 1), 0.5, 1e-12);
}

TEST(LimitGain, SmallPriorScalarLimit) {
    const double eps = 1e-6;
    const Matrix k =
        limit_gain_q_zero(eps * Matrix::Identity(4, 4), Matrix::Identity(4, 4), cv_h(), Matrix::Identity(2, 2));
    EXPECT_NEAR(k(0, 0), eps / (eps + 1.0), 1e-15);
    EXPECT_NEAR(k(1, 1), eps / (eps + 1.0), 1e-15);
}

TEST(LimitGain, SingularPriorThrows) {
    EXPECT_THROW(limit_gain_q_zero(Matrix::Zero(4, 4), Matrix::Identity(4, 4), cv_h(), Matrix::Identity(2, 2)),
                 NumericalError);
}

// Q = 0 gain equals the closed form with explicit inverses.
TEST(LimitGain, EquivalentToZeroQGainProperty) {
    Rng rng(20230417);
    for (auto kind : {models::ModelKind::CV, models::ModelKind::CA}) {
        const auto m = models::make_model(kind, 0.1);
        const int n = m.state_dim;
        for (int trial = 0; trial < 100; ++trial) {
            const Matrix p = random_spd(n, rng, 0.5);
            const Matrix r = random_spd(2, rng, 0.5);
            const auto prior = propagate(initialize(Vector::Zero(n), p), m.phi, Matrix::Zero(n, n));
            const Matrix k = gain(prior.p, m.h, r);
            const Matrix oracle = limit_gain_q_zero(p, m.phi, m.h, r);
            EXPECT_LT((k - oracle).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
        }
    }
}

TEST(Lse, PositionEqualsMeasurement) {
    const Vec2 z(3.5, -2.0);
    for (const Matrix& r : {Matrix(Matrix::Identity(2, 2) * 2.0), Matrix(Vector{{1.0, 4.0}}.asDiagonal())}) {
        for (auto kind : {models::ModelKind::CV, models::ModelKind::CA}) {
            const auto est = lse_estimate({z, 0}, models::make_model(kind).h, r);
            ASSERT_EQ(est.components.size(), 2u);
            EXPECT_EQ(est.components[0], 0);
            EXPECT_EQ(est.components[1], 1);
            EXPECT_NEAR(est.values(0), z.x(), 1e-12);
            EXPECT_NEAR(est.values(1), z.y(), 1e-12);
        }
    }
}

TEST(Lse, RankDeficientThrows) {
    // Both rows observe x + y; the observed columns are not separable.
    Matrix h = Matrix::Zero(2, 4);
    h.leftCols(2).setOnes();
    EXPECT_THROW(lse_estimate({Vec2(1, 1), 0}, h, Matrix::Identity(2, 2)), NumericalError);
}

TEST(Lse, HugeQFilterTracksMeasurements) {
    const auto m = models::make_model(models::ModelKind::CV, 0.1);
    const Matrix q = models::q_matrix(m, kQInfinity);
    const Matrix r = models::r_matrix(1.0);
    Rng rng(3);
    std::normal_distribution<double> g;
    auto fs = initialize(Vector::Zero(4), Matrix::Identity(4, 4));
    for (std::size_t k = 1; k < 200; ++k) {
        const Vec2 z(g(rng) + 0.5 * k, g(rng));
        fs = update(propagate(fs, m.phi, q), {z, k}, m.h, r);
        if (k < 2) continue;  // Q first reaches the position variance through step 1's propagation
        const auto lse = lse_estimate({z, k}, m.h, r);
        EXPECT_LT((fs.x_hat.head<2>() - lse.values).cwiseAbs().maxCoeff(), 1e-3) << "step " << k;
    }
}

// P stays symmetric PSD and the Joseph form agrees with the short form.
TEST(Covariance, SymmetricPsdAndJosephProperty) {
    Rng rng(11);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::normal_distribution<double> g;
    for (auto kind : {models::ModelKind::CV, models::ModelKind::CA}) {
        const auto m = models::make_model(kind, 0.05);
        const int n = m.state_dim;
        for (int trial = 0; trial < 20; ++trial) {
            auto fs = initialize(Vector::Zero(n), random_spd(n, rng));
            const Matrix r = random_spd(2, rng, 0.2);
            for (std::size_t k = 1; k <= 50; ++k) {
                const auto prior = propagate(fs, m.phi, models::q_matrix(m, u(rng)));
                fs = update(prior, {Vec2(g(rng), g(rng)), k}, m.h, r);
                ASSERT_LT((fs.p - fs.p.transpose()).cwiseAbs().maxCoeff(), 1e-9 * fs.p.cwiseAbs().maxCoeff());
                ASSERT_GE(min_eig(fs.p), -1e-9 * fs.p.cwiseAbs().maxCoeff());

                const Matrix ikh = Matrix::Identity(n, n) - fs.k_gain * m.h;
                const Matrix joseph = ikh * prior.p * ikh.transpose() + fs.k_gain * r * fs.k_gain.transpose();
                ASSERT_LT((joseph - ikh * prior.p).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, prior.p.norm()));
            }
        }
    }
}

TEST(Nis, RequiresAnUpdate) {
    EXPECT_THROW(normalized_innovation_squared(initialize(Vector::Zero(4), Matrix::Identity(4, 4))), StateError);
}

TEST(Nis, MatchesDefinition) {
    auto fs = initialize(Vector::Zero(4), Matrix::Identity(4, 4));
    fs = update(fs, {Vec2(1, 2), 1}, cv_h(), Matrix::Identity(2, 2));
    // S = 2I, ν = (1, 2)
    EXPECT_NEAR(normalized_innovation_squared(fs), 2.5, 1e-12);
}

TEST(InnovationWindowType, ZeroCapacityRejected) { EXPECT_THROW(InnovationWindow(0), ConfigError); }
