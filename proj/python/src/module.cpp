#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "crossgrasp/data.hpp"
#include "crossgrasp/eigengrasp.hpp"
#include "crossgrasp/errors.hpp"
#include "crossgrasp/gevaluate.hpp"
#include "crossgrasp/kinematics.hpp"
#include "crossgrasp/morphology.hpp"
#include "crossgrasp/synth.hpp"
#include "crossgrasp/train.hpp"

namespace py = pybind11;
using namespace crossgrasp;

namespace {

WristPose make_wrist(const Eigen::Vector3d& t, const Vector6d& r6) {
  WristPose w;
  w.t = t;
  w.r6 = r6;
  return w;
}

py::dict tokens_dict(const MorphologyTokens& t) {
  py::dict d;
  d["M"] = t.joint_count;
  d["D_max"] = t.max_dof;
  d["raw"] = t.raw;
  d["pad_mask"] = t.key_padding_mask;
  d["rho"] = t.revolute_mask;
  return d;
}

py::dict verdict_dict(const GraspVerdict& v) {
  py::dict d;
  d["stable"] = v.stable;
  d["fc_margin"] = v.fc_margin;
  d["penetration"] = v.penetration;
  d["contact_count"] = v.contact_count;
  return d;
}

py::dict prediction_dict(const Prediction& p) {
  py::dict d;
  d["q"] = p.q;
  d["q_raw"] = p.q_raw;
  d["clamp"] = p.clamp;
  d["amplitudes"] = p.amplitudes;
  d["eigengrasps"] = p.eigengrasps.compact();
  d["morphology"] = Eigen::VectorXd(p.morphology.transpose());
  d["wall_time_s"] = p.wall_time_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "crossgrasp core bindings";

  py::exception<Error>(m, "CrossgraspError", PyExc_ValueError);
  // the instance carries the error kind name as .kind
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = py::module_::import("crossgrasp._core").attr("CrossgraspError");
      py::object exc = type(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  py::class_<HandModel>(m, "HandModel")
      .def_property_readonly("name", &HandModel::name)
      .def_property_readonly("dof", &HandModel::dof)
      .def_property_readonly("joint_count", &HandModel::joint_count)
      .def_property_readonly("link_names",
                             [](const HandModel& h) {
                               std::vector<std::string> names;
                               for (const auto& l : h.links()) names.push_back(l.name);
                               return names;
                             })
      .def_property_readonly("revolute_joint_names",
                             [](const HandModel& h) {
                               std::vector<std::string> names;
                               for (int j : h.revolute_joints()) names.push_back(h.joints()[j].name);
                               return names;
                             })
      .def_property_readonly("limits", [](const HandModel& h) {
        Eigen::MatrixXd lim(h.dof(), 2);
        for (int k = 0; k < h.dof(); ++k) {
          const auto& j = h.joints()[h.revolute_joints()[k]];
          lim(k, 0) = j.lower;
          lim(k, 1) = j.upper;
        }
        return lim;
      });

  m.def("parse_urdf", [](const std::string& text) { return parse_urdf(text); }, py::arg("text"));
  m.def("load_urdf", &load_urdf, py::arg("path"));
  m.def("synth_hand_urdf",
        [](int fingers, int joints_per_finger) {
          HandSpec spec;
          spec.fingers = fingers;
          spec.joints_per_finger = joints_per_finger;
          return synth_hand_urdf(spec);
        },
        py::arg("fingers") = 3, py::arg("joints_per_finger") = 3);

  m.def("tokenize", [](const HandModel& h, int max_joints, int max_dof) { return tokens_dict(tokenize(h, max_joints, max_dof)); },
        py::arg("hand"), py::arg("max_joints") = kDefaultMaxJoints, py::arg("max_dof") = kDefaultMaxDof);

  m.def("forward_kinematics",
        [](const HandModel& h, const Eigen::VectorXd& q, const Eigen::Vector3d& t, const Vector6d& r6) {
          std::vector<Eigen::Matrix4d> out;
          for (const auto& T : forward_kinematics(h, q, make_wrist(t, r6))) out.push_back(T.matrix());
          return out;
        },
        py::arg("hand"), py::arg("q"), py::arg("t") = Eigen::Vector3d(Eigen::Vector3d::Zero()),
        py::arg("r6") = (Vector6d() << 1, 0, 0, 0, 1, 0).finished());
  m.def("fingertip_links", &fingertip_links, py::arg("hand"));
  m.def("fingertip_jacobian",
        [](const HandModel& h, const Eigen::VectorXd& q, int tip) { return Eigen::MatrixXd(fingertip_jacobian(h, q, tip)); },
        py::arg("hand"), py::arg("q"), py::arg("tip"));
  m.def("kal_weights", [](const HandModel& h, const Eigen::VectorXd& q, const Vector6d& lambda) { return kal_weights(h, q, lambda).w; },
        py::arg("hand"), py::arg("q"), py::arg("lambda_") = default_kal_lambda());

  m.def("pca_eigengrasps",
        [](const Eigen::MatrixXd& q, int k) { return RowMatrix(pca_eigengrasps(q, k, static_cast<int>(q.cols())).compact()); },
        py::arg("q_data"), py::arg("k") = kDefaultEigengraspCount, "Compact K x d basis");
  m.def("decode_articulation",
        [](const Eigen::VectorXd& a, const RowMatrix& basis) {
          return decode_articulation(a, EigengraspSet::from_compact(basis, static_cast<int>(basis.cols())));
        },
        py::arg("amplitudes"), py::arg("basis"));
  m.def("encode_amplitudes",
        [](const Eigen::VectorXd& q, const RowMatrix& basis) {
          return encode_amplitudes(q, EigengraspSet::from_compact(basis, static_cast<int>(basis.cols())));
        },
        py::arg("q"), py::arg("basis"));

  m.def("evaluate_grasp",
        [](const HandModel& h, const Eigen::VectorXd& q, const Eigen::Vector3d& t, const Vector6d& r6, const RowMatrix& cloud,
           double mu, std::uint64_t seed) {
          EvalConfig cfg;
          cfg.mu = mu;
          cfg.seed = seed;
          return verdict_dict(evaluate_grasp(h, q, make_wrist(t, r6), cloud, cfg));
        },
        py::arg("hand"), py::arg("q"), py::arg("t"), py::arg("r6"), py::arg("cloud"), py::arg("mu") = 0.5,
        py::arg("seed") = 0);

  m.def("predict_articulation",
        [](const std::string& urdf_text, const RowMatrix& cloud, const Eigen::Vector3d& t, const Vector6d& r6,
           const std::filesystem::path& checkpoint) {
          return prediction_dict(predict_articulation(urdf_text, cloud, make_wrist(t, r6), checkpoint));
        },
        py::arg("urdf_text"), py::arg("cloud"), py::arg("t"), py::arg("r6"), py::arg("checkpoint"));

  m.def("write_untrained_checkpoint",
        [](const std::filesystem::path& path, const std::string& preset, std::uint64_t seed) {
          ModelConfig cfg = preset == "small" ? ModelConfig::small() : ModelConfig{};
          if (preset != "small" && preset != "desk") fail(ErrorKind::ConfigMismatch, "unknown model preset '" + preset + "'");
          cfg.seed = seed;
          write_json_file(path, grasp_checkpoint(GraspModel(cfg)));
        },
        py::arg("path"), py::arg("preset") = "desk", py::arg("seed") = 7);

  m.def("load_dataset",
        [](const std::filesystem::path& path) {
          const Dataset data = load_dataset(path);
          py::list samples;
          for (const auto& s : data.samples) {
            py::dict d;
            d["hand_id"] = s.hand_id;
            d["object_id"] = s.object_id;
            d["cloud"] = s.cloud;
            d["t"] = s.wrist.t;
            d["r6"] = s.wrist.r6;
            d["q"] = s.q;
            d["stable"] = s.stable ? py::cast(*s.stable) : py::none();
            samples.append(d);
          }
          return samples;
        },
        py::arg("path"));
}
