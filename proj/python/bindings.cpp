#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "bimreg/error.hpp"
#include "bimreg/pipeline.hpp"

namespace py = pybind11;
using namespace bimreg;

namespace {

using Rows2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Rows3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Rows4 = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

std::vector<Point2> to_points2(const Rows2& m) {
  std::vector<Point2> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

Rows3 from_points3(const std::vector<Point3>& pts) {
  Rows3 m(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(i) = pts[i].transpose();
  return m;
}

Submap to_submap(const Rows3& m) {
  Submap s;
  s.points.resize(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) s.points[i] = m.row(i).transpose();
  return s;
}

Rows4 walls_of(const WallModel& model) {
  Rows4 m(model.walls.size(), 4);
  for (std::size_t i = 0; i < model.walls.size(); ++i) {
    const LineSegment2& w = model.walls[i];
    m.row(i) << w.p0().x(), w.p0().y(), w.p1().x(), w.p1().y();
  }
  return m;
}

WallModel make_model(const Rows4& walls, const std::string& floor_id) {
  WallModel model;
  model.floor_id = floor_id;
  for (Eigen::Index i = 0; i < walls.rows(); ++i) {
    model.walls.emplace_back(Point2(walls(i, 0), walls(i, 1)), Point2(walls(i, 2), walls(i, 3)));
  }
  return model;
}

PipelineConfig config_from(const py::dict& values) {
  PipelineConfig cfg;
  for (const auto& [k, v] : values) {
    set_config_value(cfg, py::str(k).cast<std::string>(), py::str(v).cast<std::string>());
  }
  cfg.validate();
  return cfg;
}

struct Registration {
  RegistrationResult result;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "BIM wall model to LiDAR submap registration";

  static py::exception<Error> error(m, "BimregError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      py::object inst = exc(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  py::class_<Se2Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init<double, double, double>(), py::arg("x"), py::arg("y"), py::arg("yaw"))
      .def_readonly("x", &Se2Pose::x)
      .def_readonly("y", &Se2Pose::y)
      .def_readonly("yaw", &Se2Pose::yaw)
      .def("matrix", &Se2Pose::matrix)
      .def("inverse", &Se2Pose::inverse)
      .def("__mul__", [](const Se2Pose& a, const Se2Pose& b) { return a * b; })
      .def("apply",
           [](const Se2Pose& pose, const Rows2& pts) {
             Rows2 out(pts.rows(), 2);
             for (Eigen::Index i = 0; i < pts.rows(); ++i) {
               out.row(i) = (pose * Point2(pts.row(i).transpose())).transpose();
             }
             return out;
           })
      .def("rotation_error", &rotation_error, py::arg("gt"))
      .def("translation_error", &translation_error, py::arg("gt"))
      .def("__repr__", [](const Se2Pose& p) {
        std::ostringstream s;
        s << "Pose(x=" << p.x << ", y=" << p.y << ", yaw=" << p.yaw << ")";
        return s.str();
      });

  m.def(
      "solve_se2",
      [](const Rows2& src, const Rows2& dst) {
        if (src.rows() != dst.rows()) {
          throw Error(ErrorCode::kInvalidArgument, "src and dst differ in length");
        }
        const auto a = to_points2(src), b = to_points2(dst);
        const Se2Fit fit = solve_se2(a, b);
        return py::make_tuple(fit.pose, fit.rms_residual);
      },
      py::arg("src"), py::arg("dst"));

  py::class_<PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def(py::init(&config_from), py::arg("values"))
      .def_static("load", &load_config, py::arg("path"))
      .def_static("keys", &config_keys)
      .def("__getitem__", [](const PipelineConfig& c, const std::string& k) { return get_config_value(c, k); })
      .def("__setitem__", [](PipelineConfig& c, const std::string& k, const py::object& v) {
        set_config_value(c, k, py::str(v).cast<std::string>());
      })
      .def("validate", &PipelineConfig::validate)
      .def("__str__", [](const PipelineConfig& c) {
        std::ostringstream s;
        write_config(s, c);
        return s.str();
      });

  py::class_<WallModel>(m, "WallModel")
      .def(py::init(&make_model), py::arg("walls"), py::arg("floor_id") = "0")
      .def_readwrite("floor_id", &WallModel::floor_id)
      .def_property_readonly("walls", &walls_of);

  m.def("load_building", &load_building, py::arg("path"));
  m.def("save_building", [](const std::vector<WallModel>& floors, const std::filesystem::path& path) {
    save_building(floors, path);
  }, py::arg("floors"), py::arg("path"));
  m.def("generate_floorplan", &generate_floorplan, py::arg("seed"), py::arg("rooms") = 12,
        py::arg("corridor") = true, py::arg("extent_m") = 10.0);

  m.def("load_submap", [](const std::filesystem::path& p) { return from_points3(load_submap(p).points); },
        py::arg("path"));
  m.def("save_submap", [](const Rows3& pts, const std::filesystem::path& p) { save_submap(to_submap(pts), p); },
        py::arg("points"), py::arg("path"));
  m.def("load_pose", &load_pose, py::arg("path"));
  m.def("save_pose", &save_pose, py::arg("pose"), py::arg("path"));

  m.def(
      "synthesize_submap",
      [](const WallModel& model, const Se2Pose& pose, double radius_m, double noise_m,
         double drop_frac, double clutter_frac, std::uint64_t seed) {
        const SyntheticScene s =
            synthesize_submap(model, pose, radius_m, noise_m, drop_frac, clutter_frac, seed);
        return py::make_tuple(from_points3(s.submap.points), s.gt_pose);
      },
      py::arg("model"), py::arg("pose"), py::arg("radius_m") = 10.0, py::arg("noise_m") = 0.0,
      py::arg("drop_frac") = 0.0, py::arg("clutter_frac") = 0.0, py::arg("seed") = 0);

  py::class_<FloorIndex>(m, "FloorIndex")
      .def_property_readonly("floor_id", [](const FloorIndex& f) { return f.model.floor_id; })
      .def_property_readonly("corner_count", [](const FloorIndex& f) { return f.db.corners().size(); })
      .def_property_readonly("key_count", [](const FloorIndex& f) { return f.db.key_count(); })
      .def("save_db", [](const FloorIndex& f, const std::filesystem::path& p) { serialize_db(f.db, p); },
           py::arg("path"));

  m.def("build_floor_index", &build_floor_index, py::arg("model"), py::arg("config") = PipelineConfig());
  m.def(
      "load_floor_index",
      [](const WallModel& model, const std::filesystem::path& db, const PipelineConfig& cfg) {
        return make_floor_index(model, deserialize_db(db), cfg);
      },
      py::arg("model"), py::arg("db"), py::arg("config") = PipelineConfig());

  py::class_<Registration>(m, "Registration")
      .def_property_readonly("pose", [](const Registration& r) { return r.result.best.candidate.pose; })
      .def_property_readonly("confidence", [](const Registration& r) { return r.result.best.confidence; })
      .def_property_readonly("floor_id", [](const Registration& r) { return r.result.floor_id; })
      .def_property_readonly("votes", [](const Registration& r) { return r.result.best.candidate.votes; })
      .def_property_readonly("time_ms", [](const Registration& r) { return r.result.timings.total_ms(); })
      .def_property_readonly("candidates", [](const Registration& r) {
        // x, y, yaw, votes, confidence per candidate of the winning floor
        const auto& reports = r.result.best_floor().reports;
        Eigen::Matrix<double, Eigen::Dynamic, 5, Eigen::RowMajor> out(reports.size(), 5);
        for (std::size_t i = 0; i < reports.size(); ++i) {
          const auto& c = reports[i].candidate;
          out.row(i) << c.pose.x, c.pose.y, c.pose.yaw, c.votes, reports[i].confidence;
        }
        return out;
      });

  m.def(
      "register",
      [](const Rows3& points, const std::vector<FloorIndex>& floors, const PipelineConfig& cfg) {
        const Submap submap = to_submap(points);
        py::gil_scoped_release release;
        return Registration{register_submap(submap, floors, cfg)};
      },
      py::arg("points"), py::arg("floors"), py::arg("config") = PipelineConfig());

  m.def(
      "confidence_at",
      [](const Rows3& points, const FloorIndex& floor, const Se2Pose& pose, const PipelineConfig& cfg) {
        const SubmapFeatures f = extract_submap_features(to_submap(points), cfg);
        return score_candidate(floor.field, f.q_ng, f.q_g, pose, cfg.lambda, cfg.variant()).confidence;
      },
      py::arg("points"), py::arg("floor"), py::arg("pose"), py::arg("config") = PipelineConfig());

  m.def(
      "reliability_curve",
      [](const std::vector<double>& pos, const std::vector<double>& neg) {
        const PrCurve c = reliability_curve(pos, neg);
        Rows3 pts(c.points.size(), 3);
        for (std::size_t i = 0; i < c.points.size(); ++i) {
          pts.row(i) << c.points[i].threshold, c.points[i].precision, c.points[i].recall;
        }
        return py::make_tuple(pts, c.auc);
      },
      py::arg("positives"), py::arg("negatives"));
}
