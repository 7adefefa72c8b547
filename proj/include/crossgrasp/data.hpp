#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crossgrasp/morphology.hpp"
#include "crossgrasp/rotation.hpp"
#include "crossgrasp/urdf.hpp"

namespace crossgrasp {

using Cloud = RowMatrix;  // N x 3, meters
using DataRng = std::mt19937_64;

struct GraspSample {
  std::string hand_id;
  std::string object_id;
  Cloud cloud;
  std::string cloud_ref;  // set when the cloud lives in an XYZ file
  WristPose wrist;
  Eigen::VectorXd q;
  std::optional<bool> stable;
};

struct HandEntry {
  std::string urdf;  // path relative to the dataset file
  HandModel model;
};

struct Dataset {
  std::map<std::string, HandEntry> hands;
  std::vector<GraspSample> samples;

  /// Sample indices per hand id, in file order.
  std::map<std::string, std::vector<std::size_t>> by_hand() const;
  const HandModel& hand(const std::string& id) const;
};

inline constexpr int kDatasetVersion = 1;
inline constexpr std::size_t kInlineCloudLimit = 1024;

/// Translates the centroid to the origin. Throws EmptyCloud.
Cloud normalize_cloud(const Cloud& cloud);

/// Reads a JSON-lines dataset: a header line
/// {"schema": "crossgrasp.grasps", "version": 1, "hands": {id: {"urdf": path}}}
/// followed by one sample per line. Clouds are centroid-normalized and the
/// wrist translation is shifted with them.
Dataset load_dataset(const std::filesystem::path& path);

/// Writes `data` next to `path`; clouds above kInlineCloudLimit points go to
/// "<stem>_clouds/<index>.xyz". Hand URDF paths are written as given.
void write_dataset(const std::filesystem::path& path, const Dataset& data);

Cloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const Cloud& cloud);

struct AugmentConfig {
  double rot_range_deg = 20.0;
  double sigma_pcl = 0.002;
  double sigma_trans = 0.001;
  double sigma_rot = 0.01;
  double sigma_art = 0.002;
  std::uint64_t seed = 0;
};

/// Three intrinsic XYZ angles, each uniform in [-range, range] degrees (returned in radians).
Eigen::Vector3d sample_rotation_angles(DataRng& rng, double range_deg);

/// Rotates the cloud and the wrist about the world origin by R.
GraspSample rotate_sample(const GraspSample& sample, const Eigen::Matrix3d& rotation);

GraspSample augment_geometric(const GraspSample& sample, DataRng& rng, double range_deg = 20.0,
                              Eigen::Vector3d* angles = nullptr);

/// Zero-mean Gaussian noise on cloud points, wrist translation, the raw 6D
/// rotation (re-orthonormalized afterwards) and the articulation.
GraspSample augment_noise(const GraspSample& sample, const AugmentConfig& cfg, DataRng& rng,
                          Vector6d* r6_noise = nullptr);

/// Geometric randomization followed by noise injection.
GraspSample augment(const GraspSample& sample, const AugmentConfig& cfg, DataRng& rng);

/// Independent stream for (seed, a, b), e.g. (seed, epoch, sample index).
DataRng stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace crossgrasp
