#include <doctest.h>

#include <Eigen/Geometry>

#include <random>

#include "mvlift/metrics.hpp"
#include "test_helpers.hpp"

using namespace mvlift;
using namespace mvlift::test;

namespace {

Pose3D similarity_transformed(const Pose3D& pose, double scale, const Mat3& rotation,
                              const Vec3& translation) {
    Pose3D out = pose;
    out.landmarks =
        (scale * (pose.landmarks * rotation.transpose())).rowwise() + translation.transpose();
    return out;
}

}  // namespace

TEST_CASE("mpjpe basics") {
    std::mt19937_64 rng(3);
    const Pose3D gt = world_pose(random_landmarks(5, rng));
    CHECK(mpjpe(gt, gt) == 0.0);

    Pose3D pred = gt;
    pred.landmarks(1, 0) += 3.0;
    pred.landmarks(1, 1) += 4.0;
    CHECK(mpjpe(pred, gt) == doctest::Approx(1.0).epsilon(1e-12));

    // Naive-loop oracle on random pairs; symmetry and nonnegativity.
    for (int trial = 0; trial < 20; ++trial) {
        const Pose3D a = world_pose(random_landmarks(7, rng));
        const Pose3D b = world_pose(random_landmarks(7, rng));
        double sum = 0.0;
        for (int i = 0; i < 7; ++i) {
            double sq = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = a.landmarks(i, k) - b.landmarks(i, k);
                sq += d * d;
            }
            sum += std::sqrt(sq);
        }
        CHECK(rel_err(mpjpe(a, b), sum / 7.0) < 1e-12);
        CHECK(mpjpe(a, b) == mpjpe(b, a));
        CHECK(mpjpe(a, b) >= 0.0);
    }

    Pose3D short_pose = world_pose(random_landmarks(4, rng));
    CHECK_THROWS_AS(mpjpe(short_pose, gt), ContractViolation);
}

TEST_CASE("procrustes recovers an applied similarity transform") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Pose3D gt = world_pose(random_landmarks(10, rng));
        const Mat3 rotation = random_rotation(rng);
        std::uniform_real_distribution<double> scale_dist(0.3, 3.0);
        const double scale = scale_dist(rng);
        const Vec3 translation = random_landmarks(1, rng).row(0).transpose();

        // pred = s R gt + t; aligning pred onto gt must invert the transform.
        const Pose3D pred = similarity_transformed(gt, scale, rotation, translation);
        const AlignmentResult result = procrustes_align(pred, gt);

        CHECK(mpjpe(result.aligned_pose, gt) < 1e-8);
        CHECK(result.scale == doctest::Approx(1.0 / scale).epsilon(1e-9));
        CHECK((result.rotation - rotation.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(result.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("procrustes identity and reflection handling") {
    std::mt19937_64 rng(7);
    const Pose3D gt = world_pose(random_landmarks(8, rng));
    const AlignmentResult identity = procrustes_align(gt, gt);
    CHECK((identity.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(identity.scale == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(identity.translation.norm() < 1e-9);

    // Mirror through the yz plane: the best proper rotation cannot undo a
    // reflection, so the residual stays positive and det(R) stays +1.
    Pose3D mirrored = gt;
    mirrored.landmarks.col(0) *= -1.0;
    const AlignmentResult reflected = procrustes_align(mirrored, gt);
    CHECK(reflected.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mpjpe(reflected.aligned_pose, gt) > 1e-3);
}

TEST_CASE("procrustes rejects degenerate inputs") {
    Pose3D coincident;
    coincident.landmarks = Landmarks3D::Zero(5, 3);
    std::mt19937_64 rng(11);
    const Pose3D gt = world_pose(random_landmarks(5, rng));
    CHECK_THROWS_AS(procrustes_align(coincident, gt), NumericalError);
    CHECK_THROWS_AS(procrustes_align(gt, coincident), ContractViolation);
}

TEST_CASE("p_mpjpe is invariant under similarity transforms of the prediction") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Pose3D gt = world_pose(random_landmarks(9, rng));
        const Pose3D pred = world_pose(random_landmarks(9, rng));
        const double base = p_mpjpe(pred, gt);

        std::uniform_real_distribution<double> scale_dist(0.5, 2.0);
        const Pose3D moved = similarity_transformed(pred, scale_dist(rng), random_rotation(rng),
                                                    random_landmarks(1, rng).row(0).transpose());
        CHECK(std::abs(p_mpjpe(moved, gt) - base) < 1e-8);

        // Compositional oracle: align then measure in two explicit steps.
        const AlignmentResult alignment = procrustes_align(pred, gt);
        CHECK(rel_err(base, mpjpe(alignment.aligned_pose, gt)) < 1e-12);
    }
}

TEST_CASE("p_mpjpe never exceeds mpjpe on root-aligned pairs") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Pose3D gt = world_pose(random_landmarks(9, rng));
        Pose3D pred = world_pose(random_landmarks(9, rng));
        gt.landmarks.rowwise() -= gt.landmarks.row(0);
        pred.landmarks.rowwise() -= pred.landmarks.row(0);
        CHECK(p_mpjpe(pred, gt) <= mpjpe(pred, gt) + 1e-9);
    }
}

TEST_CASE("pck3d counts landmarks within threshold") {
    std::mt19937_64 rng(19);
    const Pose3D gt = world_pose(random_landmarks(10, rng));
    CHECK(pck3d({gt}, {gt}, 1e-9) == 1.0);
    CHECK(pck3d({gt}, {gt}, 150.0) == 1.0);

    // Every landmark off by exactly twice the threshold.
    const double threshold = 50.0;
    Pose3D off = gt;
    off.landmarks.col(0).array() += 2.0 * threshold;
    CHECK(pck3d({off}, {gt}, threshold) == 0.0);

    // Naive counting oracle on random data + monotonicity in the threshold.
    std::vector<Pose3D> preds, gts;
    for (int i = 0; i < 6; ++i) {
        preds.push_back(world_pose(random_landmarks(8, rng, 50.0)));
        gts.push_back(world_pose(random_landmarks(8, rng, 50.0)));
    }
    align_pose_pairs(preds, gts, PckAlignment::Root, 0);
    double last = -1.0;
    for (double t : {10.0, 40.0, 80.0, 160.0, 320.0}) {
        const double fraction = pck3d(preds, gts, t);
        std::int64_t correct = 0, total = 0;
        for (size_t i = 0; i < preds.size(); ++i) {
            for (int m = 0; m < 8; ++m) {
                const Vec3 a = preds[i].landmarks.row(m).transpose();
                const Vec3 b = gts[i].landmarks.row(m).transpose();
                if ((a - b).norm() <= t) ++correct;
                ++total;
            }
        }
        CHECK(fraction == doctest::Approx(double(correct) / double(total)));
        CHECK(fraction >= last);
        last = fraction;
    }

    // Root alignment pins the root landmark of both sides to the origin.
    CHECK(preds[0].landmarks.row(0).norm() == 0.0);
    CHECK(gts[0].landmarks.row(0).norm() == 0.0);
}

TEST_CASE("auc3d averages pck over the threshold grid") {
    std::mt19937_64 rng(23);
    const Pose3D gt = world_pose(random_landmarks(10, rng));
    CHECK(auc3d({gt}, {gt}) == 1.0);

    std::vector<Pose3D> preds{world_pose(random_landmarks(10, rng, 60.0))};
    std::vector<Pose3D> gts{world_pose(random_landmarks(10, rng, 60.0))};
    double sum = 0.0;
    for (int i = 0; i < 31; ++i) {
        sum += pck3d(preds, gts, 150.0 * i / 30.0);
    }
    CHECK(auc3d(preds, gts) == doctest::Approx(sum / 31.0).epsilon(1e-12));

    CHECK_THROWS_AS(pck3d({}, {}, 10.0), ContractViolation);
}
