#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gshell/grid.hpp"
#include "gshell/mesh.hpp"
#include "gshell/tensorize.hpp"

namespace gshell {

using json = nlohmann::json;

// Shortest decimal string that round-trips the exact double, and its inverse.
// All floats in the text formats go through these so that re-serialising a
// loaded file is byte-identical.
std::string double_to_string(double v);
double string_to_double(const std::string& s);

// Write-to-temp + rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path); // throws InvalidInput if unreadable

std::string sha256_hex_bytes(std::string_view bytes);
std::string sha256_hex_file(const std::string& path);

// Grid JSON (version 1). Scalars are stored as round-trip decimal strings;
// the reader also accepts plain JSON numbers.
void save_grid_json(const std::string& path, const TetGrid& grid);
TetGrid load_grid_json(const std::string& path);

// Binary tensor container: 8-byte magic, u64 little-endian header length,
// JSON header, then the raw little-endian base and alpha tensors. Writes
// f64; the reader also accepts dtype f32.
void save_gsp(const std::string& path, const TensorGrid& t);
TensorGrid load_gsp(const std::string& path);

// Wavefront OBJ: v/f records, 1-based; boundary edges as l records.
void save_obj(const std::string& path, const ExtractedMesh& mesh);
void load_obj(const std::string& path, std::vector<Vec3>& positions,
              std::vector<std::array<uint32_t, 3>>& faces);

// ascii PLY with per-vertex projected msdf and boundary flag.
void save_ply(const std::string& path, const ExtractedMesh& mesh);

// Point clouds: one "x y z" line per point; blank lines and # comments are
// skipped, extra columns ignored.
void save_xyz(const std::string& path, const std::vector<Vec3>& points);
std::vector<Vec3> load_xyz(const std::string& path);

void save_json(const std::string& path, const json& j);
json load_json(const std::string& path);

} // namespace gshell
