#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "engage/error.hpp"
#include "engage/synthgen.hpp"
#include "engage/visual.hpp"

using namespace engage;
using namespace engage::visual;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Elementary rotations written out by hand, independent of the library.
Mat3 rx(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
Mat3 ry(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Mat3 rz(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

LandmarkFrame blank_frame(int w = 640, int h = 480) {
  LandmarkFrame f;
  f.image_width = w;
  f.image_height = h;
  return f;
}

VisualFrameFeatures frontal(double ear = 0.3) {
  VisualFrameFeatures f;
  f.ear = ear;
  return f;
}

}  // namespace

TEST_SUITE("visual") {
  TEST_CASE("rodrigues special cases") {
    CHECK(rodrigues({Vec3::Zero()}).isApprox(Mat3::Identity(), 0.0));
    const Mat3 q = rodrigues({Vec3(0, 0, std::numbers::pi / 2)});
    Mat3 expect;
    expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((q - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("rodrigues agrees with Eigen angle-axis") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      Vec3 axis(u(gen), u(gen), u(gen));
      axis.normalize();
      const double theta = std::numbers::pi * (u(gen) + 1.0) / 2.0;
      const Mat3 oracle = Eigen::AngleAxisd(theta, axis).toRotationMatrix();
      CHECK((rodrigues({theta * axis}) - oracle).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("rotation_log inverts rodrigues") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      Vec3 v(u(gen), u(gen), u(gen));
      v *= 3.0 / std::max(1.0, v.norm());
      const Mat3 r = rodrigues({v});
      CHECK((rodrigues(rotation_log(r)) - r).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(rotation_log(r).angle() <= std::numbers::pi + 1e-12);
    }
  }

  TEST_CASE("euler composition matches Rz*Ry*Rx") {
    const EulerAngles a{12.0, -25.0, 33.0};
    const Mat3 oracle = rz(33.0 * kDeg) * ry(-25.0 * kDeg) * rx(12.0 * kDeg);
    CHECK((euler_to_rotation(a) - oracle).cwiseAbs().maxCoeff() < 1e-12);
    const auto back = rotation_to_euler(oracle);
    CHECK(back.pitch_deg == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(back.yaw_deg == doctest::Approx(-25.0).epsilon(1e-12));
    CHECK(back.roll_deg == doctest::Approx(33.0).epsilon(1e-12));
  }

  TEST_CASE("euler decomposition at gimbal lock reproduces the matrix") {
    const Mat3 r = rz(0.4) * ry(std::numbers::pi / 2) * rx(0.1);
    const auto e = rotation_to_euler(r);
    CHECK(e.roll_deg == 0.0);
    CHECK(e.yaw_deg == doctest::Approx(90.0));
    CHECK((euler_to_rotation(e) - r).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("EAR matches a hand computation") {
    auto f = blank_frame();
    // Left eye: width 30, lid gaps 6 and 4 -> (6 + 4) / 60.
    f.points[36] = {100, 100};
    f.points[39] = {130, 100};
    f.points[37] = {110, 97};
    f.points[41] = {110, 103};
    f.points[38] = {120, 98};
    f.points[40] = {120, 102};
    // Right eye: width 40, lid gaps 8 and 8 -> 16 / 80.
    f.points[42] = {200, 100};
    f.points[45] = {240, 100};
    f.points[43] = {213, 96};
    f.points[47] = {213, 104};
    f.points[44] = {227, 96};
    f.points[46] = {227, 104};
    CHECK(compute_ear(f) == doctest::Approx((10.0 / 60.0 + 16.0 / 80.0) / 2.0).epsilon(1e-15));
  }

  TEST_CASE("EAR with coincident corners names the eye") {
    auto f = blank_frame();
    f.points[42] = {200, 100};
    f.points[45] = {240, 100};
    f.points[36] = f.points[39] = {100, 100};
    try {
      compute_ear(f);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("left") != std::string::npos);
    }
  }

  TEST_CASE("gaze vector is image centre minus mean eye centre") {
    auto f = blank_frame(640, 480);
    for (int i = 36; i < 42; ++i) f.points[i] = {300.0 + i, 200.0};
    for (int i = 42; i < 48; ++i) f.points[i] = {360.0 + i, 210.0};
    const double left_cx = 300.0 + (36 + 37 + 38 + 39 + 40 + 41) / 6.0;
    const double right_cx = 360.0 + (42 + 43 + 44 + 45 + 46 + 47) / 6.0;
    const Point2 g = compute_gaze_vector(f);
    CHECK(g.x == doctest::Approx(320.0 - (left_cx + right_cx) / 2.0));
    CHECK(g.y == doctest::Approx(240.0 - 205.0));
  }

  TEST_CASE("eye categories switch exactly at the thresholds") {
    const VisualThresholds th;
    auto eye = [&](double ear) { return categorize(frontal(ear), 640, 480, th).eye_open; };
    CHECK(eye(0.15) == EyeOpenness::kClosed);
    CHECK(eye(std::nextafter(0.15, 1.0)) == EyeOpenness::kPartiallyClosed);
    CHECK(eye(0.25) == EyeOpenness::kPartiallyClosed);
    CHECK(eye(std::nextafter(0.25, 1.0)) == EyeOpenness::kFullyOpen);
    CHECK(eye(0.0) == EyeOpenness::kClosed);
  }

  TEST_CASE("head position priority and signs") {
    const VisualThresholds th;
    auto head = [&](double p, double y, double r) {
      VisualFrameFeatures f = frontal();
      f.pose = {p, y, r};
      return categorize(f, 640, 480, th).head_pos;
    };
    CHECK(head(0, 0, 0) == HeadPosition::kNeutral);
    CHECK(head(0, 15, 0) == HeadPosition::kNeutral);
    CHECK(head(0, 15.001, 0) == HeadPosition::kTurnedLeft);
    CHECK(head(0, -20, 0) == HeadPosition::kTurnedRight);
    CHECK(head(20, 0, 0) == HeadPosition::kDown);
    CHECK(head(-20, 0, 0) == HeadPosition::kUp);
    CHECK(head(0, 0, 20) == HeadPosition::kTiltedRight);
    CHECK(head(0, 0, -20) == HeadPosition::kTiltedLeft);
    CHECK(head(30, 20, 40) == HeadPosition::kTurnedLeft);
    CHECK(head(30, 0, 40) == HeadPosition::kDown);
  }

  TEST_CASE("gaze categories and tie rule") {
    const VisualThresholds th;
    auto gaze = [&](double gx, double gy) {
      VisualFrameFeatures f = frontal();
      f.gaze = {gx, gy};
      return categorize(f, 640, 480, th).gaze_dir;
    };
    CHECK(gaze(64, 48) == GazeDirection::kForward);
    CHECK(gaze(65, 0) == GazeDirection::kLeft);
    CHECK(gaze(-65, 0) == GazeDirection::kRight);
    CHECK(gaze(0, 49) == GazeDirection::kUp);
    CHECK(gaze(0, -49) == GazeDirection::kDown);
    // |gx|/w == |gy|/h: horizontal wins.
    CHECK(gaze(128, 96) == GazeDirection::kLeft);
    CHECK(gaze(64, 97) == GazeDirection::kUp);
  }

  TEST_CASE("threshold validation") {
    VisualThresholds th;
    th.ear_closed_max = 0.3;
    CHECK_THROWS_AS(th.validate(), ConfigError);
    th = {};
    th.yaw_deg = 0.0;
    CHECK_THROWS_AS(th.validate(), ConfigError);
  }

  TEST_CASE("aggregation gives per-group proportions") {
    std::vector<VisualCategorical> cats(4);
    cats[1].gaze_dir = GazeDirection::kLeft;
    cats[2].head_pos = HeadPosition::kTiltedRight;
    cats[3].eye_open = EyeOpenness::kClosed;
    const auto v = aggregate_video(cats).values;
    CHECK(v[0] == 0.75);
    CHECK(v[1] == 0.25);
    CHECK(v[5] == 0.75);
    CHECK(v[11] == 0.25);
    CHECK(v[12] == 0.75);
    CHECK(v[14] == 0.25);
    double g = 0, h = 0, e = 0;
    for (int i = 0; i < 5; ++i) g += v[i];
    for (int i = 5; i < 12; ++i) h += v[i];
    for (int i = 12; i < 15; ++i) e += v[i];
    CHECK(g == doctest::Approx(1.0));
    CHECK(h == doctest::Approx(1.0));
    CHECK(e == doctest::Approx(1.0));
    CHECK_THROWS_AS(aggregate_video({}), DataError);
    CHECK(visual_feature_names()[0] == "gaze_forward");
  }

  TEST_CASE("PnP recovers a synthetic pose and reports small residual") {
    const auto cam = CameraModel::for_image(640, 480);
    const EulerAngles truth{10.0, -20.0, 5.0};
    const auto seq = synth::gen_pose_frames(truth, cam, 1);
    const auto est = estimate_head_pose(seq.frames[0], cam);
    CHECK(est.pitch_deg == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(est.yaw_deg == doctest::Approx(-20.0).epsilon(1e-6));
    CHECK(est.roll_deg == doctest::Approx(5.0).epsilon(1e-6));

    std::array<Point2, 6> img;
    for (std::size_t k = 0; k < 6; ++k) img[k] = seq.frames[0].points[kPoseAnchorIndices[k]];
    const auto res = solve_pnp(face_model_points(), img, cam);
    CHECK(res.rms_reprojection_px < 1e-6);
    CHECK(res.translation.z() > 0.0);
    CHECK(res.translation.z() == doctest::Approx(1000.0).epsilon(1e-6));
  }

  TEST_CASE("PnP rejects collinear anchors") {
    const auto cam = CameraModel::for_image(640, 480);
    std::array<Point2, 6> img;
    for (std::size_t k = 0; k < 6; ++k) img[k] = {100.0 + 10.0 * k, 200.0 + 5.0 * k};
    CHECK_THROWS_AS(solve_pnp(face_model_points(), img, cam), DegenerateError);
  }

  TEST_CASE("PnP hits the iteration cap on a tiny budget") {
    const auto cam = CameraModel::for_image(640, 480);
    const auto seq = synth::gen_pose_frames({20.0, 25.0, -10.0}, cam, 1);
    std::array<Point2, 6> img;
    for (std::size_t k = 0; k < 6; ++k) img[k] = seq.frames[0].points[kPoseAnchorIndices[k]];
    CHECK_THROWS_AS(solve_pnp(face_model_points(), img, cam, {1, 1e-10}), ConvergenceError);
  }

  TEST_CASE("rendered head motion agrees with the image-space sign conventions") {
    const auto cam = CameraModel::for_image(640, 480);
    auto nose_offset = [&](EulerAngles a) {
      const auto f = synth::gen_pose_frames(a, cam, 1).frames[0];
      const double mid_x = (f.points[36].x + f.points[45].x) / 2.0;
      const double mid_y = (f.points[36].y + f.points[45].y) / 2.0;
      return Point2{f.points[30].x - mid_x, f.points[30].y - mid_y};
    };
    const auto base = nose_offset({});
    CHECK(nose_offset({0, 20, 0}).x < base.x);   // yaw > 0: nose to image-left
    CHECK(nose_offset({20, 0, 0}).y > base.y);   // pitch > 0: nose down
    const auto tilted = synth::gen_pose_frames({0, 0, 20}, cam, 1).frames[0];
    // roll > 0: top of head leans image-right, so the right eye corner sits lower.
    CHECK(tilted.points[45].y > tilted.points[36].y);
  }

  TEST_CASE("camera override") {
    CameraOverride o;
    auto c = o.resolve(640, 480);
    CHECK(c.focal_length == 640.0);
    CHECK(c.cx == 320.0);
    o.focal_length = 800.0;
    o.has_principal_point = true;
    o.cx = 300.0;
    o.cy = 250.0;
    c = o.resolve(640, 480);
    CHECK(c.focal_length == 800.0);
    CHECK(c.cy == 250.0);
  }

  TEST_CASE("frame failures carry the frame index") {
    auto rec = VideoRecord{};
    rec.video_id = "x";
    rec.fps = 30;
    rec.width = 640;
    rec.height = 480;
    const auto cam = CameraModel::for_image(640, 480);
    rec.frames = synth::gen_pose_frames({}, cam, 3).frames;
    rec.trace.fps = 30;
    rec.trace.samples.assign(3, Rgb{140, 110, 95});
    for (std::size_t k = 0; k < 6; ++k) rec.frames[2].points[kPoseAnchorIndices[k]] = {10.0 * k, 10.0 * k};
    try {
      analyze_frames(rec, {});
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
    }
  }
}
