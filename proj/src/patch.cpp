#include "nodulekit/patch.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace nodulekit {

namespace {

constexpr double kAirHu = -1000.0;
constexpr double kWindowLo = -1000.0;
constexpr double kWindowHi = 400.0;

std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f32le(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32le(out, bits);
}

float read_f32le(const std::uint8_t* p) {
    const std::uint32_t bits = read_u32le(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

}  // namespace

const char* norm_mode_name(NormMode m) {
    return m == NormMode::hu_window ? "hu_window" : "scan_minmax";
}

NormMode norm_mode_from_name(const std::string& name) {
    if (name == "hu_window") return NormMode::hu_window;
    if (name == "scan_minmax") return NormMode::scan_minmax;
    throw Error("unknown normalization mode '" + name + "'");
}

RawPatch extract_patch(const CTVolume& volume, const Vec3& center, const PatchShape& shape) {
    if (shape.w <= 0 || shape.h <= 0 || shape.d <= 0 ||
        shape.w % 2 == 0 || shape.h % 2 == 0 || shape.d % 2 == 0)
        throw ShapeMismatch("extract_patch: W, H, D must be positive and odd");

    const int cx = static_cast<int>(std::llround(center.x));
    const int cy = static_cast<int>(std::llround(center.y));
    const int cz = static_cast<int>(std::llround(center.z));
    if (!volume.dims.contains(cx, cy, cz))
        throw CenterOutOfBounds("extract_patch: centre outside volume");

    RawPatch patch;
    patch.shape = shape;
    patch.hu.resize(shape.count());
    const int rx = shape.w / 2, ry = shape.h / 2, rz = shape.d / 2;

    std::size_t i = 0;
    for (int dz = -rz; dz <= rz; ++dz)
        for (int dy = -ry; dy <= ry; ++dy)
            for (int dx = -rx; dx <= rx; ++dx) {
                const int x = cx + dx, y = cy + dy, z = cz + dz;
                patch.hu[i++] = volume.dims.contains(x, y, z)
                                    ? static_cast<double>(volume.at(x, y, z))
                                    : kAirHu;
            }
    return patch;
}

Patch normalize_patch(const RawPatch& raw, NormMode mode, double scan_min, double scan_max) {
    double lo = kWindowLo, hi = kWindowHi;
    if (mode == NormMode::scan_minmax) {
        if (!(scan_max > scan_min))
            throw DegenerateRange("normalize_patch: scan_max must exceed scan_min");
        lo = scan_min;
        hi = scan_max;
    }

    Patch patch;
    patch.shape = raw.shape;
    patch.scan_min_hu = scan_min;
    patch.scan_max_hu = scan_max;
    patch.values.resize(raw.hu.size());
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < raw.hu.size(); ++i) {
        double v = (raw.hu[i] - lo) * inv;
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        patch.values[i] = static_cast<float>(v);
    }
    return patch;
}

std::vector<std::uint8_t> container_to_bytes(const PatchSet& set) {
    PatchShape shape = set.patches.empty() ? PatchShape{0, 0, 0} : set.patches[0].shape;
    nlohmann::json ids = nlohmann::json::array();
    nlohmann::json labels = nlohmann::json::array();
    nlohmann::json scan_min = nlohmann::json::array();
    nlohmann::json scan_max = nlohmann::json::array();
    for (const Patch& p : set.patches) {
        if (!(p.shape == shape))
            throw ShapeMismatch("container_to_bytes: patches must share one shape");
        ids.push_back(p.item_id);
        labels.push_back(p.label);
        scan_min.push_back(p.scan_min_hu);
        scan_max.push_back(p.scan_max_hu);
    }
    const nlohmann::json header = {
        {"n_items", set.patches.size()},
        {"shape", {shape.w, shape.h, shape.d}},
        {"normalization", norm_mode_name(set.normalization)},
        {"design", set.design},
        {"ids", ids},
        {"labels", labels},
        {"scan_min", scan_min},
        {"scan_max", scan_max},
    };
    const std::string hdr = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(12 + hdr.size() + 4 * set.patches.size() * shape.count());
    out.push_back('N');
    out.push_back('D');
    out.push_back('X');
    out.push_back('1');
    put_u32le(out, 1);  // version
    put_u32le(out, static_cast<std::uint32_t>(hdr.size()));
    out.insert(out.end(), hdr.begin(), hdr.end());
    for (const Patch& p : set.patches)
        for (const float v : p.values) put_f32le(out, v);
    return out;
}

PatchSet container_from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "NDX1", 4) != 0)
        throw BadMagic("NDX1: bad magic");
    if (bytes.size() < 12) throw TruncatedPayload("NDX1: truncated header");
    const std::uint32_t version = read_u32le(bytes.data() + 4);
    if (version != 1)
        throw VersionUnsupported("NDX1: version " + std::to_string(version));
    const std::uint32_t header_len = read_u32le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
        throw TruncatedPayload("NDX1: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception&) {
        throw TruncatedPayload("NDX1: header is not valid JSON");
    }

    PatchSet set;
    std::size_t n_items = 0;
    PatchShape shape;
    try {
        n_items = header.at("n_items").get<std::size_t>();
        const auto& sh = header.at("shape");
        shape = {sh.at(0).get<int>(), sh.at(1).get<int>(), sh.at(2).get<int>()};
        set.normalization = norm_mode_from_name(header.at("normalization").get<std::string>());
        set.design = header.at("design").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw TruncatedPayload("NDX1: missing header field");
    }

    const std::size_t expected = 12 + header_len + 4 * n_items * shape.count();
    if (bytes.size() != expected)
        throw TruncatedPayload("NDX1: payload is " + std::to_string(bytes.size()) +
                               " bytes, expected " + std::to_string(expected));

    const std::uint8_t* p = bytes.data() + 12 + header_len;
    set.patches.resize(n_items);
    try {
        for (std::size_t i = 0; i < n_items; ++i) {
            Patch& patch = set.patches[i];
            patch.shape = shape;
            patch.item_id = header.at("ids").at(i).get<std::string>();
            patch.label = header.at("labels").at(i).get<int>();
            patch.scan_min_hu = header.at("scan_min").at(i).get<double>();
            patch.scan_max_hu = header.at("scan_max").at(i).get<double>();
            patch.values.resize(shape.count());
            for (std::size_t j = 0; j < patch.values.size(); ++j, p += 4)
                patch.values[j] = read_f32le(p);
        }
    } catch (const nlohmann::json::exception&) {
        throw TruncatedPayload("NDX1: header arrays shorter than n_items");
    }
    return set;
}

std::size_t write_container(const PatchSet& set, const std::filesystem::path& path) {
    const auto bytes = container_to_bytes(set);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    return bytes.size();
}

PatchSet read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return container_from_bytes(bytes);
}

}  // namespace nodulekit
