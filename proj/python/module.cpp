#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "shmpose/kinematics.hpp"

// Python bindings for the solver core: the inverse/forward column maps,
// chain solving and the render-pose conversion.

namespace py = pybind11;
using namespace shmpose;

namespace {

std::string point_repr(const Point3& p) {
  std::ostringstream out;
  out << "Point3(" << p.x << ", " << p.y << ", " << p.z << ")";
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_shmpose, m) {
  m.doc() = "Rigid-column displacement-to-pose solver";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SingularityError>(m, "SingularityError",
                                           PyExc_ValueError);

  py::class_<Point3>(m, "Point3")
      .def(py::init<>())
      .def(py::init<double, double, double>(), py::arg("x"), py::arg("y"),
           py::arg("z"))
      .def(py::init([](py::tuple t) {
             if (t.size() != 3) {
               throw py::value_error("expected an (x, y, z) triple");
             }
             return Point3{t[0].cast<double>(), t[1].cast<double>(),
                           t[2].cast<double>()};
           }),
           py::arg("xyz"))
      .def_readwrite("x", &Point3::x)
      .def_readwrite("y", &Point3::y)
      .def_readwrite("z", &Point3::z)
      .def("__eq__", [](const Point3& a, const Point3& b) { return a == b; })
      .def("__add__", [](const Point3& a, const Point3& b) { return a + b; })
      .def("__sub__", [](const Point3& a, const Point3& b) { return a - b; })
      .def("__repr__", &point_repr);
  py::implicitly_convertible<py::tuple, Point3>();

  py::class_<ColumnGeometry>(m, "ColumnGeometry")
      .def(py::init<double, Point3, Point3>(), py::arg("length"),
           py::arg("rest_bottom"), py::arg("rest_top"))
      .def_readwrite("length", &ColumnGeometry::length)
      .def_readwrite("rest_bottom", &ColumnGeometry::rest_bottom)
      .def_readwrite("rest_top", &ColumnGeometry::rest_top);

  py::class_<ColumnSolution>(m, "ColumnSolution")
      .def_readonly("r_y", &ColumnSolution::r_y)
      .def_readonly("t_x", &ColumnSolution::t_x)
      .def_readonly("top_primed", &ColumnSolution::top_primed)
      .def_readonly("dz_shortening", &ColumnSolution::dz_shortening)
      .def_readonly("delta_x", &ColumnSolution::delta_x)
      .def_readonly("delta_y", &ColumnSolution::delta_y);

  py::class_<ColumnPose>(m, "ColumnPose")
      .def_readonly("r_y", &ColumnPose::r_y)
      .def_readonly("t_x", &ColumnPose::t_x)
      .def_readonly("center_translation", &ColumnPose::center_translation);

  m.def("safe_asin", &safe_asin, py::arg("value"),
        py::arg("tolerance") = kAsinNoiseTolerance,
        "asin that clamps values just past |1| (measurement noise) and "
        "raises DomainError beyond the tolerance.");

  m.def("solve_column", &solve_column, py::arg("bottom_primed"),
        py::arg("top_measured_x"), py::arg("top_measured_y"),
        py::arg("geometry"),
        "Recover (r_y, t_x) and the deformed top position from measured "
        "horizontal top coordinates; z comes from the rigid length.");

  m.def("forward_column", &forward_column, py::arg("bottom_primed"),
        py::arg("geometry"), py::arg("r_y"), py::arg("t_x"),
        "Deformed top position for prescribed rotations (the exact inverse "
        "of solve_column).");

  m.def("solve_chain", &solve_chain, py::arg("chain"),
        py::arg("measured_xy_per_node"), py::arg("base_primed"),
        "Solve a stacked chain bottom-up; each column's bottom is the "
        "previous solved top.");

  m.def("center_pose", &center_pose, py::arg("solution"), py::arg("length"),
        py::arg("bottom_shift"),
        "Render pose: the same rotations plus the column-center translation "
        "(z signed, negative under shortening).");
}
