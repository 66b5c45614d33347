#include "hakf/error.hpp"
#include "hakf/motion_model.hpp"

#include <gtest/gtest.h>

using namespace hakf;
using namespace hakf::models;

TEST(MakeModel, ConstantVelocityTransition) {
    const auto m = make_model(ModelKind::CV, 1.0);
    Matrix expect(4, 4);
    expect << 1, 0, 1, 0,  //
        0, 1, 0, 1,        //
        0, 0, 1, 0,        //
        0, 0, 0, 1;
    EXPECT_EQ(m.phi, expect);
    EXPECT_EQ(m.state_dim, 4);
}

TEST(MakeModel, ConstantAccelerationBlocks) {
    const auto m = make_model(ModelKind::CA, 2.0);
    EXPECT_EQ(m.phi.block(0, 2, 2, 2), 2.0 * Matrix::Identity(2, 2));
    EXPECT_EQ(m.phi.block(0, 4, 2, 2), 2.0 * Matrix::Identity(2, 2));  // ½·2²
    EXPECT_EQ(m.phi.block(2, 4, 2, 2), 2.0 * Matrix::Identity(2, 2));
    EXPECT_EQ(m.phi.diagonal(), kalman::Vector::Ones(6));
    EXPECT_EQ(m.state_dim, 6);
}

TEST(MakeModel, ObservationSelectsPosition) {
    for (auto kind : {ModelKind::CV, ModelKind::CA}) {
        const auto m = make_model(kind, 0.3);
        kalman::Vector x = kalman::Vector::LinSpaced(m.state_dim, 1.0, m.state_dim);
        EXPECT_EQ(m.h * x, kalman::Vector((kalman::Vector(2) << 1.0, 2.0).finished()));
        EXPECT_EQ(m.h.rows(), 2);
        EXPECT_EQ((m.h.array() == 0.0 || m.h.array() == 1.0).all(), true);
    }
}

TEST(MakeModel, NonPositiveStepThrows) {
    EXPECT_THROW(make_model(ModelKind::CV, 0.0), ConfigError);
    EXPECT_THROW(make_model(ModelKind::CA, -0.1), ConfigError);
    EXPECT_THROW(make_model(ModelKind::CV, std::numeric_limits<double>::infinity()), ConfigError);
}

TEST(MakeModel, CvEmbedsInCa) {
    const double dt = 0.37;
    const auto cv = make_model(ModelKind::CV, dt);
    const auto ca = make_model(ModelKind::CA, dt);
    kalman::Vector pv(4);
    pv << 1.5, -2.0, 0.3, 4.0;
    kalman::Vector pva = kalman::Vector::Zero(6);
    pva.head<4>() = pv;
    EXPECT_TRUE((ca.phi * pva).head<4>().isApprox(cv.phi * pv));
}

TEST(QMatrix, CvIsotropic) {
    const auto m = make_model(ModelKind::CV, 1.0);
    Matrix expect = kalman::Vector{{0.0, 0.0, 0.04, 0.04}}.asDiagonal();
    EXPECT_EQ(q_matrix(m, 0.04), expect);
}

TEST(QMatrix, CaZero) { EXPECT_TRUE(q_matrix(make_model(ModelKind::CA, 1.0), 0.0).isZero()); }

TEST(QMatrix, Anisotropic) {
    const auto q = q_matrix(make_model(ModelKind::CV, 1.0), NoiseSpec{1.0, 2.0, 1.0, 1.0});
    EXPECT_EQ(q(2, 2), 1.0);
    EXPECT_EQ(q(3, 3), 2.0);
    EXPECT_EQ(q.cwiseAbs().sum(), 3.0);
}

TEST(QMatrix, PsdRankAtMostTwo) {
    for (auto kind : {ModelKind::CV, ModelKind::CA}) {
        const auto q = q_matrix(make_model(kind, 0.1), NoiseSpec{0.7, 3.0, 1.0, 1.0});
        Eigen::SelfAdjointEigenSolver<Matrix> es(q);
        EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
        EXPECT_LE(Eigen::FullPivLU<Matrix>(q).rank(), 2);
    }
}

TEST(QMatrix, NegativeIntensityThrows) {
    EXPECT_THROW(q_matrix(make_model(ModelKind::CV, 1.0), -0.1), ConfigError);
    EXPECT_THROW(validate(NoiseSpec{0.1, 0.1, 0.0, 1.0}), ConfigError);
}

TEST(RMatrix, Diagonal) {
    EXPECT_EQ(r_matrix(2.0), 2.0 * Matrix::Identity(2, 2));
    const auto r = r_matrix(NoiseSpec{0, 0, 1.0, 4.0});
    EXPECT_EQ(r(0, 0), 1.0);
    EXPECT_EQ(r(1, 1), 4.0);
}

TEST(ModelKindText, RoundTrip) {
    EXPECT_EQ(parse_model_kind("CV"), ModelKind::CV);
    EXPECT_EQ(parse_model_kind("ca"), ModelKind::CA);
    EXPECT_EQ(to_string(ModelKind::CA), "ca");
    EXPECT_THROW(parse_model_kind("singer"), ConfigError);
    EXPECT_EQ(state_dim(ModelKind::CA), 6);
}
