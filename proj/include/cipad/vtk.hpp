#pragma once

/// @file vtk.hpp
/// Minimal legacy-ASCII VTK writer for triangle meshes: point scalars sampled
/// at mesh vertices (for Lagrange fields the vertex coefficient is the vertex
/// value) and per-element cell scalars (switch states). Output is
/// deterministic, using the same `%.17g` formatting as the CSV layer.

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "cipad/csv.hpp"
#include "cipad/space.hpp"

namespace cipad {

struct VtkOutput {
  std::vector<std::pair<std::string, const Field*>> point_fields;
  std::vector<std::pair<std::string, const std::vector<double>*>> cell_fields;
};

inline void write_vtk(const std::string& path, const Space& sp, const VtkOutput& data,
                      const std::string& title = "snapshot") {
  const Mesh& mesh = sp.mesh();
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "write_vtk: cannot open " + path);

  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  for (const auto& v : mesh.vertices)
    out << csv_num(v.x) << " " << csv_num(v.y) << " 0\n";

  const index_t nt = mesh.n_elements();
  out << "CELLS " << nt << " " << 4 * nt << "\n";
  for (const auto& t : mesh.triangles)
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << nt << "\n";
  for (index_t i = 0; i < nt; ++i) out << "5\n";

  if (!data.point_fields.empty()) {
    out << "POINT_DATA " << mesh.n_vertices() << "\n";
    for (const auto& [name, field] : data.point_fields) {
      require(field->space.get() == &sp, "write_vtk: field from another space");
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (index_t v = 0; v < mesh.n_vertices(); ++v)
        out << csv_num(field->coeffs[sp.vertex_dof(v)]) << "\n";
    }
  }
  if (!data.cell_fields.empty()) {
    out << "CELL_DATA " << nt << "\n";
    for (const auto& [name, values] : data.cell_fields) {
      require(static_cast<index_t>(values->size()) == nt,
              "write_vtk: cell data size mismatch");
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : *values) out << csv_num(v) << "\n";
    }
  }
}

}  // namespace cipad
