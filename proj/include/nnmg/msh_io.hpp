// Copyright the nnmg authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef NNMG_MSH_IO_HPP
#define NNMG_MSH_IO_HPP

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nnmg/mesh.hpp"

namespace nnmg
{

//
// Gmsh MSH 2.2 ASCII. Triangles (type 2) and tetrahedra (type 4) become cells; elements
// of one dimension lower become boundary facets tagged with their physical tag. Points
// (type 15) and, in 3D, lines (type 1) are ignored. Cells with negative orientation are
// reoriented on read.
//
namespace detail
{

inline int msh_nodes_per_element(int type)
{
  switch (type)
  {
    case 1:
      return 2;
    case 2:
      return 3;
    case 4:
      return 4;
    case 15:
      return 1;
    default:
      return -1;
  }
}

inline std::string msh_next_line(std::istream &in, const std::string &section)
{
  std::string line;
  while (std::getline(in, line))
  {
    if (!line.empty() && line.back() == '\r')
    {
      line.pop_back();
    }
    if (!line.empty())
    {
      return line;
    }
  }
  throw ParseError("MSH: unexpected end of file inside section $" + section +
                   " (missing $End" + section + ")");
}

inline void msh_expect(std::istream &in, const std::string &section)
{
  const std::string line = msh_next_line(in, section);
  if (line != "$End" + section)
  {
    throw ParseError("MSH: expected $End" + section + ", found '" + line + "'");
  }
}

}  // namespace detail

inline SimplexMesh read_msh(std::istream &in)
{
  std::map<Index, Point> nodes;
  struct RawElement
  {
    int type;
    int tag;
    std::vector<Index> nodes;
  };
  std::vector<RawElement> elements;
  bool have_format = false, have_nodes = false, have_elements = false;

  std::string line;
  while (std::getline(in, line))
  {
    if (!line.empty() && line.back() == '\r')
    {
      line.pop_back();
    }
    if (line.empty())
    {
      continue;
    }
    if (line.front() != '$')
    {
      throw ParseError("MSH: unexpected content outside a section: '" + line + "'");
    }
    const std::string section = line.substr(1);
    if (section == "MeshFormat")
    {
      std::istringstream ls(detail::msh_next_line(in, section));
      double version = 0.0;
      int file_type = -1;
      ls >> version >> file_type;
      if (!ls || version < 2.0 || version >= 3.0 || file_type != 0)
      {
        throw ParseError("MSH: only ASCII format version 2.x is supported");
      }
      detail::msh_expect(in, section);
      have_format = true;
    }
    else if (section == "Nodes")
    {
      const Index n = std::stoll(detail::msh_next_line(in, section));
      for (Index i = 0; i < n; ++i)
      {
        std::istringstream ls(detail::msh_next_line(in, section));
        Index id = 0;
        Point p{};
        ls >> id >> p[0] >> p[1] >> p[2];
        if (!ls)
        {
          throw ParseError("MSH: malformed node line in $Nodes: '" + ls.str() + "'");
        }
        if (!nodes.emplace(id, p).second)
        {
          throw ParseError("MSH: duplicate node id " + std::to_string(id));
        }
      }
      detail::msh_expect(in, section);
      if (!nodes.empty() &&
          (nodes.begin()->first != 1 || nodes.rbegin()->first != static_cast<Index>(nodes.size())))
      {
        throw ParseError("MSH: node ids must be contiguous 1..N (index gap in $Nodes)");
      }
      have_nodes = true;
    }
    else if (section == "Elements")
    {
      const Index n = std::stoll(detail::msh_next_line(in, section));
      for (Index i = 0; i < n; ++i)
      {
        std::istringstream ls(detail::msh_next_line(in, section));
        Index id = 0;
        int type = 0, ntags = 0;
        ls >> id >> type >> ntags;
        if (!ls)
        {
          throw ParseError("MSH: malformed element line in $Elements: '" + ls.str() + "'");
        }
        const int nn = detail::msh_nodes_per_element(type);
        if (nn < 0)
        {
          throw ParseError("MSH: unsupported element type " + std::to_string(type) +
                           " (element " + std::to_string(id) + ")");
        }
        std::vector<int> tags(static_cast<std::size_t>(ntags));
        for (auto &t : tags)
        {
          ls >> t;
        }
        RawElement e{type, tags.empty() ? 0 : tags.front(), {}};
        for (int k = 0; k < nn; ++k)
        {
          Index v = 0;
          ls >> v;
          e.nodes.push_back(v);
        }
        if (!ls)
        {
          throw ParseError("MSH: truncated element line in $Elements: '" + ls.str() + "'");
        }
        elements.push_back(std::move(e));
      }
      detail::msh_expect(in, section);
      have_elements = true;
    }
    else
    {
      // Unknown section: skip to its end marker.
      while (detail::msh_next_line(in, section) != "$End" + section)
      {
      }
    }
  }
  if (!have_format)
  {
    throw ParseError("MSH: missing $MeshFormat section");
  }
  if (!have_nodes)
  {
    throw ParseError("MSH: missing $Nodes section");
  }
  if (!have_elements)
  {
    throw ParseError("MSH: missing $Elements section");
  }

  const bool is3d = std::any_of(elements.begin(), elements.end(),
                                [](const RawElement &e) { return e.type == 4; });
  const int dim = is3d ? 3 : 2;
  const int cell_type = is3d ? 4 : 2;
  const int facet_type = is3d ? 2 : 1;

  std::vector<Point> verts;
  verts.reserve(nodes.size());
  for (const auto &[id, p] : nodes)
  {
    verts.push_back(is3d ? p : Point{p[0], p[1], 0.0});
  }
  auto node_index = [&](Index id) {
    if (id < 1 || id > static_cast<Index>(verts.size()))
    {
      throw ParseError("MSH: element references unknown node " + std::to_string(id));
    }
    return id - 1;
  };

  std::vector<Cell> cells;
  std::vector<BoundaryFacet> facets;
  for (const auto &e : elements)
  {
    if (e.type == cell_type)
    {
      Cell c{-1, -1, -1, -1};
      for (int k = 0; k <= dim; ++k)
      {
        c[k] = node_index(e.nodes[static_cast<std::size_t>(k)]);
      }
      std::array<Point, 4> pts{};
      for (int k = 0; k <= dim; ++k)
      {
        pts[k] = verts[static_cast<std::size_t>(c[k])];
      }
      if (detail::signed_volume(dim, std::span<const Point>(pts.data(), dim + 1)) < 0.0)
      {
        std::swap(c[dim - 1], c[dim]);
      }
      cells.push_back(c);
    }
    else if (e.type == facet_type)
    {
      BoundaryFacet f;
      f.vertices = {-1, -1, -1};
      for (int k = 0; k < dim; ++k)
      {
        f.vertices[k] = node_index(e.nodes[static_cast<std::size_t>(k)]);
      }
      f.marker = e.tag;
      facets.push_back(f);
    }
  }
  if (cells.empty())
  {
    throw ParseError("MSH: no triangle or tetrahedron elements found");
  }
  return SimplexMesh(dim, std::move(verts), std::move(cells), std::move(facets));
}

inline SimplexMesh read_msh(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw Error("read_msh: cannot open '" + path + "'");
  }
  try
  {
    return read_msh(in);
  }
  catch (const ParseError &e)
  {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_msh(const SimplexMesh &mesh, std::ostream &out)
{
  const int dim = mesh.dim();
  char buf[128];
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.num_vertices() << "\n";
  for (Index v = 0; v < mesh.num_vertices(); ++v)
  {
    const auto &p = mesh.vertex(v);
    std::snprintf(buf, sizeof(buf), "%lld %.17g %.17g %.17g\n", static_cast<long long>(v + 1),
                  p[0], p[1], p[2]);
    out << buf;
  }
  out << "$EndNodes\n";
  const auto &facets = mesh.boundary_facets();
  out << "$Elements\n" << facets.size() + static_cast<std::size_t>(mesh.num_cells()) << "\n";
  Index id = 1;
  for (const auto &f : facets)
  {
    out << id++ << ' ' << (dim == 3 ? 2 : 1) << " 2 " << f.marker << ' ' << f.marker;
    for (int k = 0; k < dim; ++k)
    {
      out << ' ' << f.vertices[k] + 1;
    }
    out << '\n';
  }
  for (Index c = 0; c < mesh.num_cells(); ++c)
  {
    out << id++ << ' ' << (dim == 3 ? 4 : 2) << " 2 0 0";
    for (Index v : mesh.cell(c))
    {
      out << ' ' << v + 1;
    }
    out << '\n';
  }
  out << "$EndElements\n";
}

inline void write_msh(const SimplexMesh &mesh, const std::string &path)
{
  std::ofstream out(path);
  if (!out)
  {
    throw Error("write_msh: cannot open '" + path + "' for writing");
  }
  write_msh(mesh, out);
  if (!out)
  {
    throw Error("write_msh: write to '" + path + "' failed");
  }
}

}  // namespace nnmg

#endif  // NNMG_MSH_IO_HPP
