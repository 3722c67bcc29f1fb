#include "gshell/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "gshell/errors.hpp"

namespace gshell {

std::string double_to_string(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double string_to_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw FormatError("malformed number: '" + s + "'");
    return v;
}

void atomic_write_file(const std::string& path, std::string_view bytes) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidInput("cannot open for writing: " + tmp);
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out) throw InvalidInput("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw InvalidInput("rename failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex_bytes(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
        throw NumericFailure("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

std::string sha256_hex_file(const std::string& path) { return sha256_hex_bytes(read_file(path)); }

// ---------------------------------------------------------------------------
// grid JSON
// ---------------------------------------------------------------------------

namespace {

json vec_array(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(double_to_string(x));
    return a;
}

json vec3_array(const std::vector<Vec3>& v) {
    json a = json::array();
    for (const Vec3& p : v) {
        a.push_back(double_to_string(p.x));
        a.push_back(double_to_string(p.y));
        a.push_back(double_to_string(p.z));
    }
    return a;
}

double num_field(const json& j) {
    if (j.is_string()) return string_to_double(j.get<std::string>());
    if (j.is_number()) return j.get<double>();
    throw FormatError("expected a number or numeric string");
}

std::vector<double> load_scalars(const json& a, size_t expected, const char* name) {
    if (!a.is_array() || a.size() != expected)
        throw FormatError(std::string("field '") + name + "' has the wrong length");
    std::vector<double> out;
    out.reserve(expected);
    for (const auto& el : a) out.push_back(num_field(el));
    return out;
}

std::vector<Vec3> load_vec3s(const json& a, size_t expected, const char* name) {
    if (!a.is_array() || a.size() != 3 * expected)
        throw FormatError(std::string("field '") + name + "' has the wrong length");
    std::vector<Vec3> out;
    out.reserve(expected);
    for (size_t i = 0; i < expected; ++i)
        out.push_back({num_field(a[3 * i]), num_field(a[3 * i + 1]), num_field(a[3 * i + 2])});
    return out;
}

} // namespace

void save_grid_json(const std::string& path, const TetGrid& grid) {
    json j;
    j["version"] = 1;
    j["resolution"] = grid.resolution;
    j["bbox"] = json::array({double_to_string(grid.bbox.lo.x), double_to_string(grid.bbox.lo.y),
                             double_to_string(grid.bbox.lo.z), double_to_string(grid.bbox.hi.x),
                             double_to_string(grid.bbox.hi.y), double_to_string(grid.bbox.hi.z)});
    j["deformation_scale"] = double_to_string(grid.deformation_scale);
    j["canonical_positions"] = vec3_array(grid.canonical_positions);
    j["offsets"] = vec3_array(grid.offsets);
    json tets = json::array();
    for (const auto& t : grid.tets)
        for (uint32_t v : t) tets.push_back(v);
    j["tets"] = std::move(tets);
    j["sdf"] = vec_array(grid.sdf);
    j["msdf"] = vec_array(grid.msdf);
    atomic_write_file(path, j.dump() + "\n");
}

TetGrid load_grid_json(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError(std::string("grid json: ") + e.what());
    }
    try {
        if (!j.is_object() || j.value("version", 0) != 1)
            throw FormatError("grid json: missing or unsupported version");
        TetGrid grid;
        grid.resolution = j.at("resolution").get<int>();
        if (grid.resolution < 2) throw FormatError("grid json: resolution must be >= 2");
        const auto& bb = j.at("bbox");
        if (!bb.is_array() || bb.size() != 6) throw FormatError("grid json: bbox needs 6 entries");
        grid.bbox.lo = {num_field(bb[0]), num_field(bb[1]), num_field(bb[2])};
        grid.bbox.hi = {num_field(bb[3]), num_field(bb[4]), num_field(bb[5])};
        grid.deformation_scale = num_field(j.at("deformation_scale"));
        size_t n = size_t(grid.resolution) * grid.resolution * grid.resolution;
        grid.canonical_positions = load_vec3s(j.at("canonical_positions"), n, "canonical_positions");
        grid.offsets = load_vec3s(j.at("offsets"), n, "offsets");
        grid.sdf = load_scalars(j.at("sdf"), n, "sdf");
        grid.msdf = load_scalars(j.at("msdf"), n, "msdf");
        const auto& tets = j.at("tets");
        if (!tets.is_array() || tets.size() % 4 != 0)
            throw FormatError("grid json: tets length must be a multiple of 4");
        grid.tets.resize(tets.size() / 4);
        for (size_t t = 0; t < grid.tets.size(); ++t)
            for (int k = 0; k < 4; ++k) grid.tets[t][k] = tets[4 * t + k].get<uint32_t>();
        validate_grid(grid);
        return grid;
    } catch (const json::exception& e) {
        throw FormatError(std::string("grid json: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// binary tensor container
// ---------------------------------------------------------------------------

static constexpr char kGspMagic[8] = {'\x89', 'G', 'S', 'P', '\r', '\n', '\x1a', '\n'};

void save_gsp(const std::string& path, const TensorGrid& t) {
    json header;
    header["version"] = 1;
    header["dtype"] = "f64";
    header["resolution"] = t.resolution;
    header["alpha_side"] = t.alpha_side;
    header["bbox"] = json::array({double_to_string(t.bbox.lo.x), double_to_string(t.bbox.lo.y),
                                  double_to_string(t.bbox.lo.z), double_to_string(t.bbox.hi.x),
                                  double_to_string(t.bbox.hi.y), double_to_string(t.bbox.hi.z)});
    header["deformation_scale"] = double_to_string(t.deformation_scale);
    header["base_channels"] = 5;
    header["alpha_channels"] = 2;
    std::string head = header.dump();

    std::string bytes;
    bytes.reserve(16 + head.size() + 8 * (t.base.size() + t.alpha.size()));
    bytes.append(kGspMagic, 8);
    uint64_t hlen = head.size();
    char lenbuf[8];
    std::memcpy(lenbuf, &hlen, 8); // little-endian host assumed
    bytes.append(lenbuf, 8);
    bytes.append(head);
    bytes.append(reinterpret_cast<const char*>(t.base.data()), 8 * t.base.size());
    bytes.append(reinterpret_cast<const char*>(t.alpha.data()), 8 * t.alpha.size());
    atomic_write_file(path, bytes);
}

TensorGrid load_gsp(const std::string& path) {
    std::string bytes = read_file(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kGspMagic, 8) != 0)
        throw FormatError("gsp: bad magic");
    uint64_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 8, 8);
    if (16 + hlen > bytes.size()) throw FormatError("gsp: truncated header");
    json header;
    try {
        header = json::parse(bytes.substr(16, hlen));
    } catch (const json::exception& e) {
        throw FormatError(std::string("gsp header: ") + e.what());
    }
    try {
        if (header.value("version", 0) != 1) throw FormatError("gsp: unsupported version");
        std::string dtype = header.at("dtype").get<std::string>();
        if (dtype != "f64" && dtype != "f32") throw FormatError("gsp: unsupported dtype " + dtype);
        TensorGrid t;
        t.resolution = header.at("resolution").get<int>();
        t.alpha_side = header.at("alpha_side").get<int>();
        if (t.resolution < 2 || t.alpha_side != 4 * t.resolution - 3)
            throw FormatError("gsp: inconsistent resolution/alpha_side");
        const auto& bb = header.at("bbox");
        if (!bb.is_array() || bb.size() != 6) throw FormatError("gsp: bbox needs 6 entries");
        t.bbox.lo = {num_field(bb[0]), num_field(bb[1]), num_field(bb[2])};
        t.bbox.hi = {num_field(bb[3]), num_field(bb[4]), num_field(bb[5])};
        t.deformation_scale = num_field(header.at("deformation_scale"));
        if (header.at("base_channels").get<int>() != 5 ||
            header.at("alpha_channels").get<int>() != 2)
            throw FormatError("gsp: unsupported channel layout");

        size_t nbase = 5 * t.base_cells(), nalpha = 2 * t.alpha_cells();
        size_t w = dtype == "f64" ? 8 : 4;
        size_t need = 16 + hlen + w * (nbase + nalpha);
        if (bytes.size() != need) throw FormatError("gsp: payload size mismatch");
        const char* p = bytes.data() + 16 + hlen;
        t.base.resize(nbase);
        t.alpha.resize(nalpha);
        if (dtype == "f64") {
            std::memcpy(t.base.data(), p, 8 * nbase);
            std::memcpy(t.alpha.data(), p + 8 * nbase, 8 * nalpha);
        } else {
            std::vector<float> tmp(nbase + nalpha);
            std::memcpy(tmp.data(), p, 4 * tmp.size());
            for (size_t i = 0; i < nbase; ++i) t.base[i] = double(tmp[i]);
            for (size_t i = 0; i < nalpha; ++i) t.alpha[i] = double(tmp[nbase + i]);
        }
        return t;
    } catch (const json::exception& e) {
        throw FormatError(std::string("gsp header: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// meshes and point clouds
// ---------------------------------------------------------------------------

void save_obj(const std::string& path, const ExtractedMesh& mesh) {
    std::string out;
    out.reserve(mesh.vertex_count() * 40 + mesh.faces.size() * 20);
    for (const Vec3& p : mesh.positions) {
        out += "v ";
        out += double_to_string(p.x);
        out += ' ';
        out += double_to_string(p.y);
        out += ' ';
        out += double_to_string(p.z);
        out += '\n';
    }
    for (const auto& f : mesh.faces) {
        out += "f ";
        out += std::to_string(f[0] + 1);
        out += ' ';
        out += std::to_string(f[1] + 1);
        out += ' ';
        out += std::to_string(f[2] + 1);
        out += '\n';
    }
    for (const auto& e : mesh.boundary_edges) {
        out += "l ";
        out += std::to_string(e[0] + 1);
        out += ' ';
        out += std::to_string(e[1] + 1);
        out += '\n';
    }
    atomic_write_file(path, out);
}

void load_obj(const std::string& path, std::vector<Vec3>& positions,
              std::vector<std::array<uint32_t, 3>>& faces) {
    positions.clear();
    faces.clear();
    std::istringstream in(read_file(path));
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x >> p.y >> p.z))
                throw FormatError("obj: bad vertex at line " + std::to_string(lineno));
            positions.push_back(p);
        } else if (tag == "f") {
            std::array<uint32_t, 3> f{};
            std::string tok;
            int m = 0;
            while (ls >> tok && m < 3) {
                // accept v, v/t, v//n references
                long idx = std::strtol(tok.c_str(), nullptr, 10);
                if (idx == 0) throw FormatError("obj: bad face at line " + std::to_string(lineno));
                if (idx < 0) idx = long(positions.size()) + idx + 1;
                if (idx < 1 || size_t(idx) > positions.size())
                    throw FormatError("obj: face index out of range at line " +
                                      std::to_string(lineno));
                f[m++] = uint32_t(idx - 1);
            }
            if (m != 3) throw FormatError("obj: only triangles supported, line " +
                                          std::to_string(lineno));
            faces.push_back(f);
        }
    }
}

void save_ply(const std::string& path, const ExtractedMesh& mesh) {
    std::string out;
    out += "ply\nformat ascii 1.0\n";
    out += "element vertex " + std::to_string(mesh.vertex_count()) + "\n";
    out += "property double x\nproperty double y\nproperty double z\n";
    out += "property double msdf\nproperty uchar boundary\n";
    out += "element face " + std::to_string(mesh.faces.size()) + "\n";
    out += "property list uchar int vertex_indices\nend_header\n";
    for (size_t i = 0; i < mesh.vertex_count(); ++i) {
        const Vec3& p = mesh.positions[i];
        out += double_to_string(p.x);
        out += ' ';
        out += double_to_string(p.y);
        out += ' ';
        out += double_to_string(p.z);
        out += ' ';
        out += double_to_string(mesh.info[i].projected_msdf);
        out += mesh.info[i].is_boundary ? " 1\n" : " 0\n";
    }
    for (const auto& f : mesh.faces) {
        out += "3 ";
        out += std::to_string(f[0]);
        out += ' ';
        out += std::to_string(f[1]);
        out += ' ';
        out += std::to_string(f[2]);
        out += '\n';
    }
    atomic_write_file(path, out);
}

void save_xyz(const std::string& path, const std::vector<Vec3>& points) {
    std::string out;
    out.reserve(points.size() * 40);
    for (const Vec3& p : points) {
        out += double_to_string(p.x);
        out += ' ';
        out += double_to_string(p.y);
        out += ' ';
        out += double_to_string(p.z);
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::vector<Vec3> load_xyz(const std::string& path) {
    std::vector<Vec3> pts;
    std::istringstream in(read_file(path));
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ls(line);
        Vec3 p;
        if (!(ls >> p.x >> p.y >> p.z))
            throw FormatError("xyz: bad point at line " + std::to_string(lineno));
        pts.push_back(p);
    }
    return pts;
}

void save_json(const std::string& path, const json& j) { atomic_write_file(path, j.dump(2) + "\n"); }

json load_json(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError(std::string("json: ") + e.what());
    }
}

} // namespace gshell
