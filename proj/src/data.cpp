#include "crossgrasp/data.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "crossgrasp/errors.hpp"

namespace crossgrasp {

namespace fs = std::filesystem;
using nlohmann::json;

std::map<std::string, std::vector<std::size_t>> Dataset::by_hand() const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) out[samples[i].hand_id].push_back(i);
  return out;
}

const HandModel& Dataset::hand(const std::string& id) const {
  auto it = hands.find(id);
  if (it == hands.end()) fail(ErrorKind::SchemaError, "unknown hand id '" + id + "'");
  return it->second.model;
}

Cloud normalize_cloud(const Cloud& cloud) {
  if (cloud.rows() == 0) fail(ErrorKind::EmptyCloud, "cannot normalize an empty cloud");
  if (cloud.cols() != 3) fail(ErrorKind::ShapeMismatch, "point clouds must be N x 3");
  const Eigen::RowVector3d centroid = cloud.colwise().mean();
  Cloud out = cloud;
  out.rowwise() -= centroid;
  return out;
}

Cloud read_xyz(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingCloud, "cannot open cloud file " + path.string());
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream row(line);
    double x, y, z;
    if (!(row >> x)) continue;  // blank line
    if (!(row >> y >> z)) fail(ErrorKind::SchemaError, path.string() + ":" + std::to_string(line_no) + ": expected 'x y z'");
    values.insert(values.end(), {x, y, z});
  }
  Cloud out(static_cast<Eigen::Index>(values.size() / 3), 3);
  std::copy(values.begin(), values.end(), out.data());
  return out;
}

void write_xyz(const fs::path& path, const Cloud& cloud) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) out << cloud(i, 0) << ' ' << cloud(i, 1) << ' ' << cloud(i, 2) << '\n';
}

namespace {

[[noreturn]] void schema_fail(int line, const std::string& what) {
  fail(ErrorKind::SchemaError, "line " + std::to_string(line) + ": " + what);
}

Cloud cloud_from_json(const json& rows, int line) {
  if (!rows.is_array()) schema_fail(line, "\"cloud\" must be an array of [x, y, z]");
  Cloud out(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& p = rows[i];
    if (!p.is_array() || p.size() != 3) schema_fail(line, "cloud point " + std::to_string(i) + " is not [x, y, z]");
    for (int c = 0; c < 3; ++c) out(static_cast<Eigen::Index>(i), c) = p[static_cast<std::size_t>(c)].get<double>();
  }
  return out;
}

template <int N>
Eigen::Matrix<double, N, 1> fixed_vector(const json& doc, const char* key, int line) {
  if (!doc.contains(key) || !doc[key].is_array() || doc[key].size() != N) {
    schema_fail(line, std::string("\"") + key + "\" must hold " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = doc[key][static_cast<std::size_t>(i)].get<double>();
  return v;
}

GraspSample parse_sample(const json& rec, const Dataset& data, const fs::path& base, int line) {
  GraspSample s;
  if (!rec.is_object()) schema_fail(line, "record is not an object");
  if (!rec.contains("hand_id") || !rec["hand_id"].is_string()) schema_fail(line, "missing \"hand_id\"");
  s.hand_id = rec["hand_id"].get<std::string>();
  if (!data.hands.count(s.hand_id)) schema_fail(line, "hand '" + s.hand_id + "' is not declared in the header");
  s.object_id = rec.value("object_id", std::string());

  if (rec.contains("cloud")) {
    s.cloud = cloud_from_json(rec["cloud"], line);
  } else if (rec.contains("cloud_ref")) {
    s.cloud_ref = rec["cloud_ref"].get<std::string>();
    const fs::path file = base / s.cloud_ref;
    if (!fs::exists(file)) fail(ErrorKind::MissingCloud, "line " + std::to_string(line) + ": cloud file " + file.string() + " not found");
    s.cloud = read_xyz(file);
  } else {
    fail(ErrorKind::MissingCloud, "line " + std::to_string(line) + ": record has neither \"cloud\" nor \"cloud_ref\"");
  }
  if (s.cloud.rows() == 0) fail(ErrorKind::MissingCloud, "line " + std::to_string(line) + ": cloud is empty");

  if (!rec.contains("wrist") || !rec["wrist"].is_object()) schema_fail(line, "missing \"wrist\"");
  s.wrist.t = fixed_vector<3>(rec["wrist"], "t", line);
  s.wrist.r6 = fixed_vector<6>(rec["wrist"], "r6", line);
  try {
    (void)matrix_from_r6(s.wrist.r6);
  } catch (const Error& e) {
    schema_fail(line, std::string("wrist r6 is degenerate: ") + e.what());
  }

  if (!rec.contains("q") || !rec["q"].is_array()) schema_fail(line, "missing \"q\"");
  const auto q = rec["q"].get<std::vector<double>>();
  const int d = data.hand(s.hand_id).dof();
  if (static_cast<int>(q.size()) != d) {
    schema_fail(line, "q has " + std::to_string(q.size()) + " entries but hand '" + s.hand_id + "' has " +
                          std::to_string(d) + " revolute joints");
  }
  s.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
  if (rec.contains("label") && rec["label"].contains("stable")) s.stable = rec["label"]["stable"].get<bool>();

  const Eigen::RowVector3d centroid = s.cloud.colwise().mean();
  s.cloud.rowwise() -= centroid;
  s.wrist.t -= centroid.transpose();
  return s;
}

}  // namespace

Dataset load_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open dataset " + path.string());
  const fs::path base = path.parent_path();
  Dataset data;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      schema_fail(line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      if (!have_header) {
        if (rec.value("schema", "") != "crossgrasp.grasps") schema_fail(line_no, "header must declare schema \"crossgrasp.grasps\"");
        if (rec.value("version", -1) != kDatasetVersion) {
          schema_fail(line_no, "unsupported schema version (expected " + std::to_string(kDatasetVersion) + ")");
        }
        const json hands = rec.value("hands", json::object());
        for (const auto& [id, entry] : hands.items()) {
          const std::string rel = entry.at("urdf").get<std::string>();
          data.hands.emplace(id, HandEntry{rel, load_urdf(base / rel)});
        }
        have_header = true;
        continue;
      }
      data.samples.push_back(parse_sample(rec, data, base, line_no));
    } catch (const json::exception& e) {
      schema_fail(line_no, e.what());
    }
  }
  if (!have_header) fail(ErrorKind::SchemaError, path.string() + ": missing header line");
  return data;
}

void write_dataset(const fs::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  json hands = json::object();
  for (const auto& [id, entry] : data.hands) hands[id] = {{"urdf", entry.urdf}};
  out << json{{"schema", "crossgrasp.grasps"}, {"version", kDatasetVersion}, {"hands", hands}}.dump() << '\n';

  const std::string cloud_dir = path.stem().string() + "_clouds";
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const GraspSample& s = data.samples[i];
    json rec = {{"hand_id", s.hand_id}, {"object_id", s.object_id}};
    if (static_cast<std::size_t>(s.cloud.rows()) <= kInlineCloudLimit) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < s.cloud.rows(); ++r) rows.push_back({s.cloud(r, 0), s.cloud(r, 1), s.cloud(r, 2)});
      rec["cloud"] = std::move(rows);
    } else {
      const std::string rel = cloud_dir + "/" + std::to_string(i) + ".xyz";
      fs::create_directories(path.parent_path() / cloud_dir);
      write_xyz(path.parent_path() / rel, s.cloud);
      rec["cloud_ref"] = rel;
    }
    rec["wrist"] = {{"t", std::vector<double>(s.wrist.t.data(), s.wrist.t.data() + 3)},
                    {"r6", std::vector<double>(s.wrist.r6.data(), s.wrist.r6.data() + 6)}};
    rec["q"] = std::vector<double>(s.q.data(), s.q.data() + s.q.size());
    if (s.stable) rec["label"] = {{"stable", *s.stable}};
    out << rec.dump() << '\n';
  }
}

Eigen::Vector3d sample_rotation_angles(DataRng& rng, double range_deg) {
  const double limit = range_deg * std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> dist(-limit, limit);
  Eigen::Vector3d angles;
  for (int i = 0; i < 3; ++i) angles[i] = dist(rng);
  return angles;
}

GraspSample rotate_sample(const GraspSample& sample, const Eigen::Matrix3d& rotation) {
  GraspSample out = sample;
  out.cloud = sample.cloud * rotation.transpose();
  out.wrist.t = rotation * sample.wrist.t;
  out.wrist.r6 = r6_from_matrix(rotation * sample.wrist.rotation());
  return out;
}

GraspSample augment_geometric(const GraspSample& sample, DataRng& rng, double range_deg, Eigen::Vector3d* angles) {
  const Eigen::Vector3d a = sample_rotation_angles(rng, range_deg);
  if (angles) *angles = a;
  return rotate_sample(sample, euler_xyz_intrinsic(a));
}

GraspSample augment_noise(const GraspSample& sample, const AugmentConfig& cfg, DataRng& rng, Vector6d* r6_noise) {
  if (cfg.sigma_pcl < 0 || cfg.sigma_trans < 0 || cfg.sigma_rot < 0 || cfg.sigma_art < 0) {
    fail(ErrorKind::InvalidSpec, "noise scales must be non-negative");
  }
  std::normal_distribution<double> unit(0.0, 1.0);
  GraspSample out = sample;
  for (Eigen::Index i = 0; i < out.cloud.size(); ++i) out.cloud.data()[i] += cfg.sigma_pcl * unit(rng);
  for (int i = 0; i < 3; ++i) out.wrist.t[i] += cfg.sigma_trans * unit(rng);
  Vector6d r6 = sample.wrist.r6;
  for (int i = 0; i < 6; ++i) r6[i] += cfg.sigma_rot * unit(rng);
  if (r6_noise) *r6_noise = r6 - sample.wrist.r6;
  out.wrist.r6 = r6_from_matrix(matrix_from_r6(r6));
  for (Eigen::Index i = 0; i < out.q.size(); ++i) out.q[i] += cfg.sigma_art * unit(rng);
  return out;
}

GraspSample augment(const GraspSample& sample, const AugmentConfig& cfg, DataRng& rng) {
  return augment_noise(augment_geometric(sample, rng, cfg.rot_range_deg), cfg, rng);
}

DataRng stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return DataRng(seq);
}

}  // namespace crossgrasp
