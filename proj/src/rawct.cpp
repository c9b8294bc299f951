#include "nodulekit/rawct.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace nodulekit {

namespace {

constexpr char kMagic[8] = {'R', 'A', 'W', 'C', 'T', '\0', '\0', '\0'};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

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

std::int16_t rescale(std::int16_t stored, double slope, double intercept) {
    const double hu = static_cast<double>(stored) * slope + intercept;
    const long long r = std::llround(hu);
    if (r < -32768) return -32768;
    if (r > 32767) return 32767;
    return static_cast<std::int16_t>(r);
}

}  // namespace

CTVolume parse_volume_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw MalformedHeader("RAWCT: bad magic");
    const std::uint32_t header_len = read_u32le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
        throw MalformedHeader("RAWCT: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception&) {
        throw MalformedHeader("RAWCT: header is not valid JSON");
    }

    CTVolume vol;
    try {
        const auto& dims = header.at("dims");
        vol.dims = {dims.at(0).get<int>(), dims.at(1).get<int>(), dims.at(2).get<int>()};
        const auto& sp = header.at("spacing_mm");
        vol.spacing = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
        vol.patient_id = header.at("patient_id").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw MalformedHeader("RAWCT: missing or mistyped header field");
    }
    const double slope = header.value("rescale_slope", 1.0);
    const double intercept = header.value("rescale_intercept", 0.0);
    if (header.contains("dtype") && header["dtype"] != "int16")
        throw UnsupportedDType("RAWCT: only int16 payloads are supported");
    if (vol.dims.nx <= 0 || vol.dims.ny <= 0 || vol.dims.nz <= 0)
        throw MalformedHeader("RAWCT: non-positive dims");
    if (static_cast<std::uint64_t>(vol.dims.nx) * static_cast<std::uint64_t>(vol.dims.ny) *
            static_cast<std::uint64_t>(vol.dims.nz) >
        (1ULL << 31))
        throw MalformedHeader("RAWCT: volume too large");
    if (!(vol.spacing.sx > 0) || !(vol.spacing.sy > 0) || !(vol.spacing.sz > 0))
        throw MalformedHeader("RAWCT: non-positive spacing");

    const std::size_t n = vol.dims.count();
    const std::size_t payload_off = 12 + header_len;
    if (bytes.size() - payload_off != 2 * n)
        throw PayloadSizeMismatch("RAWCT: payload is " +
                                  std::to_string(bytes.size() - payload_off) +
                                  " bytes, expected " + std::to_string(2 * n));

    vol.voxels.resize(n);
    const std::uint8_t* p = bytes.data() + payload_off;
    for (std::size_t i = 0; i < n; ++i) {
        const auto stored = static_cast<std::int16_t>(
            static_cast<std::uint16_t>(p[2 * i]) |
            (static_cast<std::uint16_t>(p[2 * i + 1]) << 8));
        vol.voxels[i] = rescale(stored, slope, intercept);
    }
    return vol;
}

CTVolume parse_volume(const std::filesystem::path& path) {
    return parse_volume_bytes(read_file(path));
}

std::vector<std::uint8_t> volume_to_bytes(const CTVolume& volume) {
    nlohmann::json header = {
        {"dims", {volume.dims.nx, volume.dims.ny, volume.dims.nz}},
        {"spacing_mm", {volume.spacing.sx, volume.spacing.sy, volume.spacing.sz}},
        {"rescale_slope", 1.0},
        {"rescale_intercept", 0.0},
        {"patient_id", volume.patient_id},
    };
    const std::string hdr = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(12 + hdr.size() + 2 * volume.voxels.size());
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32le(out, static_cast<std::uint32_t>(hdr.size()));
    out.insert(out.end(), hdr.begin(), hdr.end());
    for (const std::int16_t v : volume.voxels) {
        const auto u = static_cast<std::uint16_t>(v);
        out.push_back(static_cast<std::uint8_t>(u & 0xff));
        out.push_back(static_cast<std::uint8_t>(u >> 8));
    }
    return out;
}

void write_volume(const CTVolume& volume, const std::filesystem::path& path) {
    const auto bytes = volume_to_bytes(volume);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace nodulekit
