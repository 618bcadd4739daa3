#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "guidedmatch/dataset.hpp"

namespace gm = guidedmatch;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(GUIDEDMATCH_TEST_TMP) / "dataset" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST(LoadImu, CommentsOnlyIsEmptyDataset) {
  const auto f = write_text(scratch("imu_empty") / "imu.txt", "# header\n\n   \n# more\n");
  EXPECT_THROW(gm::load_imu(f), gm::EmptyDataset);
}

TEST(LoadImu, AccelOnlyLineGetsZeroGyroAndWarning) {
  const auto f = write_text(scratch("imu_accel") / "imu.txt", "0.0 1 0 0\n");
  std::vector<std::string> warnings;
  const auto s = gm::load_imu(f, &warnings);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].t, 0.0);
  EXPECT_EQ(s[0].accel, (gm::Vec3{1, 0, 0}));
  EXPECT_EQ(s[0].omega, gm::Vec3{});
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(LoadImu, SortsAndKeepsLaterDuplicate) {
  const auto f = write_text(scratch("imu_dup") / "imu.txt",
                            "0.2 2 0 0 0 0 0\n"
                            "0.1 1 0 0 0 0 0\n"
                            "0.2 3 0 0 0 0 9\n"
                            "0.15 5 5 5\n");
  const auto s = gm::load_imu(f);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].t, 0.1);
  EXPECT_EQ(s[1].t, 0.15);
  EXPECT_EQ(s[2].t, 0.2);
  EXPECT_EQ(s[2].accel.x, 3.0);
  EXPECT_EQ(s[2].omega.z, 9.0);
}

TEST(LoadImu, ParseErrorNamesLine) {
  const auto f = write_text(scratch("imu_bad") / "imu.txt", "# c\n0.1 1 2 3\n0.2 1 x 3\n");
  try {
    gm::load_imu(f);
    FAIL() << "expected ParseError";
  } catch (const gm::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  const auto g = write_text(scratch("imu_cols") / "imu.txt", "0.1 1 2\n");
  EXPECT_THROW(gm::load_imu(g), gm::ParseError);
  EXPECT_THROW(gm::load_imu(scratch("imu_missing") / "nope.txt"), gm::IoError);
}

TEST(LoadFeatureFile, EmptyFileIsEmptyFrame) {
  const auto f = write_text(scratch("feat_empty") / "0.5.txt", "");
  const auto frame = gm::load_feature_file(f, 0.5);
  EXPECT_TRUE(frame.features.empty());
  EXPECT_EQ(frame.timestamp, 0.5);
}

TEST(LoadFeatureFile, HexAndRealDescriptors) {
  const auto dir = scratch("feat_kinds");
  auto frame = gm::load_feature_file(write_text(dir / "a.txt", "7 10.5 20 5000 ff00a1\n"), 0.0);
  ASSERT_EQ(frame.features.size(), 1u);
  const auto& p = frame.features[0];
  EXPECT_EQ(p.id, 7);
  EXPECT_EQ(p.u, 10.5);
  EXPECT_EQ(p.d, 5000.0);
  EXPECT_EQ(p.descriptor, gm::Descriptor::binary({0xff, 0x00, 0xa1}));

  frame = gm::load_feature_file(write_text(dir / "b.txt", "1 1 1 1 0.5 -0.25 3\n2 2 2 2 1 2 3\n"), 0.0);
  ASSERT_EQ(frame.features.size(), 2u);
  EXPECT_EQ(frame.features[0].descriptor, gm::Descriptor::real({0.5, -0.25, 3}));
  // A lone decimal token is a 1-element real descriptor.
  frame = gm::load_feature_file(write_text(dir / "c.txt", "1 1 1 1 0.5\n"), 0.0);
  EXPECT_EQ(frame.features[0].descriptor.kind(), gm::DescriptorKind::real);
}

TEST(LoadFeatureFile, Errors) {
  const auto dir = scratch("feat_err");
  auto expect_line = [](const fs::path& f, std::size_t line) {
    try {
      gm::load_feature_file(f, 0.0);
      ADD_FAILURE() << "expected ParseError for " << f;
    } catch (const gm::ParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
    }
  };
  expect_line(write_text(dir / "len.txt", "1 1 1 1 ffff\n2 2 2 2 ffffff\n"), 2);
  expect_line(write_text(dir / "kind.txt", "1 1 1 1 ffff\n2 2 2 2 0.1 0.2\n"), 2);
  expect_line(write_text(dir / "dup.txt", "1 1 1 1 ff\n1 2 2 2 ff\n"), 2);
  expect_line(write_text(dir / "neg.txt", "1 1 1 -1 ff\n"), 1);
  expect_line(write_text(dir / "short.txt", "# c\n1 1 1 1\n"), 2);
}

TEST(LoadFeatures, AssociatesNearestWithinTolerance) {
  const auto dir = scratch("feat_assoc");
  write_text(dir / "0.1.txt", "1 1 1 1 aa\n");
  write_text(dir / "0.2.txt", "2 1 1 1 bb\n");
  write_text(dir / "notes.md", "ignored\n");
  EXPECT_EQ(gm::list_feature_files(dir).size(), 2u);
  const auto frame = gm::load_features(dir, 0.21);
  EXPECT_EQ(frame.timestamp, 0.2);
  EXPECT_EQ(frame.features.at(0).id, 2);
  EXPECT_THROW(gm::load_features(dir, 0.5), gm::AssociationError);
  EXPECT_THROW(gm::load_features(scratch("feat_none"), 0.0), gm::AssociationError);
}

TEST(LoadGroundtruth, IdentityRenormalizationAndOrder) {
  const auto f = write_text(scratch("gt") / "groundtruth.txt",
                            "# t tx ty tz qx qy qz qw\n"
                            "1.0 1 2 3 0 0 0 2\n"
                            "0.0 0 0 0 0 0 0 1\n");
  const auto poses = gm::load_groundtruth(f);
  ASSERT_EQ(poses.size(), 2u);
  EXPECT_EQ(poses[0].t, 0.0);
  EXPECT_EQ(poses[0].orientation.w, 1.0);
  EXPECT_EQ(poses[0].translation, gm::Vec3{});
  EXPECT_EQ(poses[1].t, 1.0);
  EXPECT_DOUBLE_EQ(poses[1].orientation.w, 1.0);
  EXPECT_EQ(poses[1].translation, (gm::Vec3{1, 2, 3}));

  const auto bad = write_text(scratch("gt_bad") / "groundtruth.txt", "0 0 0 0 0 0 0 0\n");
  EXPECT_THROW(gm::load_groundtruth(bad), gm::ParseError);
}

TEST(LoadManifest, ParsesAndResolves) {
  const auto dir = scratch("manifest");
  write_text(dir / "imu.txt", "0.1 0 0 0\n");
  fs::create_directories(dir / "feats");
  const auto m = gm::load_manifest(write_text(dir / "manifest.txt",
                                              "# sample\n"
                                              "imu = imu.txt\n"
                                              "features_dir=feats\n"
                                              "fx=500\n"
                                              "tolerance=0.05\n"));
  EXPECT_EQ(m.imu_file, dir / "imu.txt");
  EXPECT_EQ(m.features_dir, dir / "feats");
  EXPECT_EQ(m.intrinsics.fx, 500.0);
  EXPECT_EQ(m.intrinsics.fy, 525.0);
  EXPECT_EQ(m.tolerance, 0.05);
  EXPECT_EQ(m.name, "manifest");
  EXPECT_FALSE(m.groundtruth_file);

  EXPECT_THROW(gm::load_manifest(write_text(dir / "m2.txt", "imu=imu.txt\nfeatures_dir=feats\ncolour=red\n")),
               gm::ParseError);
  EXPECT_THROW(gm::load_manifest(write_text(dir / "m3.txt", "imu=imu.txt\n")), gm::ParseError);
  EXPECT_THROW(gm::load_manifest(write_text(dir / "m4.txt", "imu=gone.txt\nfeatures_dir=feats\n")), gm::IoError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.0, 0.1, -2.5, 1e-17, 123456789.123, 1.0 / 3.0, 5e300}) {
    const std::string s = gm::format_double(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(gm::format_double(0.1), "0.1");
  EXPECT_EQ(gm::format_fixed(1.23456, 3), "1.235");
}

TEST(WriteScene, RoundTrip) {
  gm::SceneConfig cfg;
  cfg.trajectory = gm::Trajectory::yaw_left(30.0);
  cfg.num_points = 80;
  cfg.gyro_noise_sigma = 0.01;
  cfg.accel_noise_sigma = 0.1;
  cfg.descriptor_noise = 2;
  const auto scene = gm::generate_scene(cfg);
  const auto dir = scratch("roundtrip");
  const auto manifest_path = gm::write_scene(scene, dir, "yaw");
  const auto m = gm::load_manifest(manifest_path);
  EXPECT_EQ(m.name, "yaw");
  ASSERT_TRUE(m.truth_file);

  const auto imu = gm::load_imu(m.imu_file);
  ASSERT_EQ(imu.size(), scene.imu.size());
  for (std::size_t k = 0; k < imu.size(); ++k) {
    EXPECT_NEAR(imu[k].t, scene.imu[k].t, 1e-9);
    EXPECT_NEAR(imu[k].accel.y, scene.imu[k].accel.y, 1e-9);
    EXPECT_NEAR(imu[k].omega.z, scene.imu[k].omega.z, 1e-9);
  }

  for (const auto& f : scene.frames) {
    const auto loaded = gm::load_features(m.features_dir, f.timestamp, m.tolerance);
    EXPECT_NEAR(loaded.timestamp, f.timestamp, 1e-9);
    ASSERT_EQ(loaded.features.size(), f.features.size());
    for (std::size_t i = 0; i < f.features.size(); ++i) {
      EXPECT_EQ(loaded.features[i].id, f.features[i].id);
      EXPECT_NEAR(loaded.features[i].u, f.features[i].u, 1e-9);
      EXPECT_NEAR(loaded.features[i].v, f.features[i].v, 1e-9);
      EXPECT_NEAR(loaded.features[i].d, f.features[i].d, 1e-9);
      EXPECT_EQ(loaded.features[i].descriptor, f.features[i].descriptor);
    }
  }

  const auto gt = gm::load_groundtruth(*m.groundtruth_file);
  ASSERT_EQ(gt.size(), scene.truth.poses.size());
  for (std::size_t j = 0; j < gt.size(); ++j) {
    const auto r = gm::quaternion_to_rotation(gt[j].orientation).transposed();
    const auto& want = scene.truth.poses[j].orientation;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) EXPECT_NEAR(r(a, b), want(a, b), 1e-9);
    }
    EXPECT_NEAR(gt[j].translation.z, scene.truth.poses[j].position.z, 1e-9);
  }

  const auto truth = gm::load_truth(*m.truth_file, m.intrinsics, m.width, m.height);
  ASSERT_EQ(truth.points.size(), scene.truth.points.size());
  ASSERT_EQ(truth.poses.size(), scene.truth.poses.size());
  for (std::size_t j = 0; j < truth.poses.size(); ++j) {
    EXPECT_NEAR(truth.poses[j].angles.psi, scene.truth.poses[j].angles.psi, 1e-9);
    for (const auto& f : scene.frames[j].features) {
      const auto px = truth.observe(j, f.id);
      ASSERT_TRUE(px);
      EXPECT_NEAR(px->u, f.u, 1e-9);
    }
  }
}
