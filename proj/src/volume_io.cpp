#include "tscf/volume_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace tscf {
namespace {

std::string strip_json_suffix(const std::string& path) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        return path.substr(0, path.size() - 5);
    return path;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// All rasters are little-endian on disk; byte-swap on big-endian hosts.
bool host_is_little_endian() {
    const std::uint16_t one = 1;
    return *reinterpret_cast<const std::uint8_t*>(&one) == 1;
}

void swap_floats(std::vector<float>& v) {
    for (float& f : v) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        u = ((u & 0xff000000u) >> 24) | ((u & 0x00ff0000u) >> 8) | ((u & 0x0000ff00u) << 8) |
            ((u & 0x000000ffu) << 24);
        std::memcpy(&f, &u, 4);
    }
}

}  // namespace

TimeSeriesVolume read_volume(const std::string& path) {
    std::string stem = strip_json_suffix(path);
    std::string header_path = stem + ".json";

    ordered_json hdr;
    try {
        hdr = ordered_json::parse(read_text(header_path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed volume header: ") + e.what());
    }

    TimeSeriesVolume v;
    try {
        v.dims = hdr.at("dims").get<std::vector<int>>();
        v.n_time = hdr.at("n_time").get<int>();
        v.dt_seconds = hdr.at("dt_seconds").get<double>();
        v.value_kind = value_kind_from_string(hdr.at("value_kind").get<std::string>());
        if (hdr.at("byte_order").get<std::string>() != "little")
            throw FormatError("unsupported byte_order");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("volume header missing field: ") + e.what());
    }

    std::string raster_name = hdr.at("raster").get<std::string>();
    fs::path raster_path = fs::path(header_path).parent_path() / raster_name;

    std::ifstream in(raster_path, std::ios::binary);
    if (!in) throw IoError("cannot open raster: " + raster_path.string());
    in.seekg(0, std::ios::end);
    std::streamoff bytes = in.tellg();
    in.seekg(0, std::ios::beg);

    std::size_t expect = 1;
    for (int d : v.dims) {
        if (d < 1) throw FormatError("volume header has non-positive extent");
        expect *= static_cast<std::size_t>(d);
    }
    if (v.n_time < 1) throw FormatError("volume header has non-positive n_time");
    expect *= static_cast<std::size_t>(v.n_time);
    if (static_cast<std::size_t>(bytes) != expect * 4)
        throw FormatError("raster length does not match header dims x n_time");

    v.data.resize(expect);
    in.read(reinterpret_cast<char*>(v.data.data()), static_cast<std::streamsize>(expect * 4));
    if (!in) throw IoError("raster read failed: " + raster_path.string());
    if (!host_is_little_endian()) swap_floats(v.data);

    for (float x : v.data)
        if (!std::isfinite(x)) throw DataError("raster contains non-finite values");
    v.validate();
    return v;
}

void write_volume(const TimeSeriesVolume& volume, const std::string& path) {
    volume.validate();
    std::string stem = strip_json_suffix(path);
    std::string name = fs::path(stem).filename().string();

    ordered_json hdr;
    hdr["dims"] = volume.dims;
    hdr["n_time"] = volume.n_time;
    hdr["dt_seconds"] = volume.dt_seconds;
    hdr["value_kind"] = to_string(volume.value_kind);
    hdr["raster"] = name + ".f32";
    hdr["byte_order"] = "little";
    write_text(stem + ".json", hdr.dump(2) + "\n");

    std::vector<float> raster = volume.data;
    if (!host_is_little_endian()) swap_floats(raster);
    std::ofstream out(stem + ".f32", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + stem + ".f32");
    out.write(reinterpret_cast<const char*>(raster.data()),
              static_cast<std::streamsize>(raster.size() * 4));
    if (!out) throw IoError("raster write failed: " + stem + ".f32");
}

AifSeries read_aif(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open AIF: " + path);

    AifSeries aif;
    bool have_kind = false;
    bool have_header_row = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            std::string key = line.substr(1, colon - 1);
            std::string val = line.substr(colon + 1);
            auto trim = [](std::string s) {
                std::size_t a = s.find_first_not_of(" \t");
                std::size_t b = s.find_last_not_of(" \t");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            key = trim(key);
            val = trim(val);
            if (key == "kind") {
                aif.kind = aif_kind_from_string(val);
                have_kind = true;
            } else if (key == "upsample_factor") {
                aif.upsample_factor = std::stoi(val);
            }
            continue;
        }
        if (!have_header_row) {
            if (line != "time_s,value")
                throw FormatError("AIF CSV must start with header row 'time_s,value'");
            have_header_row = true;
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw FormatError("AIF CSV line " + std::to_string(lineno) + " is not 'time,value'");
        try {
            aif.times.push_back(std::stod(line.substr(0, comma)));
            aif.values.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw FormatError("AIF CSV line " + std::to_string(lineno) + " has invalid numbers");
        }
    }
    if (!have_header_row) throw FormatError("AIF CSV has no header row");
    if (!have_kind) {
        // Fall back to a JSON sidecar if the comment header is absent.
        std::string sidecar = path + ".json";
        if (fs::exists(sidecar)) {
            ordered_json meta = ordered_json::parse(read_text(sidecar));
            aif.kind = aif_kind_from_string(meta.at("kind").get<std::string>());
            if (meta.contains("upsample_factor"))
                aif.upsample_factor = meta.at("upsample_factor").get<int>();
        } else {
            throw FormatError("AIF is missing kind metadata (comment header or sidecar)");
        }
    }
    aif.validate();
    return aif;
}

void write_aif(const AifSeries& aif, const std::string& path) {
    aif.validate();
    std::ostringstream ss;
    ss << "# kind: " << to_string(aif.kind) << "\n";
    ss << "# upsample_factor: " << aif.upsample_factor << "\n";
    ss << "time_s,value\n";
    ss.precision(17);
    for (std::size_t i = 0; i < aif.times.size(); ++i)
        ss << aif.times[i] << "," << aif.values[i] << "\n";
    write_text(path, ss.str());
}

namespace {

TimeSeriesVolume map_field_volume(const ParamMap& map, const std::vector<double>& field,
                                  double dt_seconds) {
    TimeSeriesVolume v = make_volume(map.dims, 1, dt_seconds, ValueKind::parameter);
    for (std::size_t i = 0; i < field.size(); ++i) v.data[i] = static_cast<float>(field[i]);
    return v;
}

}  // namespace

void write_param_map(const ParamMap& map, double dt_seconds, const std::string& stem) {
    map.validate();
    write_volume(map_field_volume(map, map.ktrans, dt_seconds), stem + "_ktrans");
    write_volume(map_field_volume(map, map.ve, dt_seconds), stem + "_ve");
    write_volume(map_field_volume(map, map.kep, dt_seconds), stem + "_kep");
    write_volume(map_field_volume(map, map.residual, dt_seconds), stem + "_residual");

    std::size_t n = map.n_voxels();
    TimeSeriesVolume conv = make_volume(map.dims, 1, dt_seconds, ValueKind::parameter);
    TimeSeriesVolume bat = make_volume(map.dims, 1, dt_seconds, ValueKind::parameter);
    for (std::size_t i = 0; i < n; ++i) {
        conv.data[i] = map.converged[i] ? 1.0f : 0.0f;
        bat.data[i] = static_cast<float>(map.bat_index[i]);
    }
    write_volume(conv, stem + "_converged");
    write_volume(bat, stem + "_bat");

    std::size_t n_conv = 0;
    double sum_k = 0.0, sum_v = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (map.converged[i]) {
            ++n_conv;
            sum_k += map.ktrans[i];
            sum_v += map.ve[i];
        }
    ordered_json summary;
    summary["dims"] = map.dims;
    summary["n_voxels"] = n;
    summary["n_converged"] = n_conv;
    summary["mean_ktrans_converged"] = n_conv ? sum_k / static_cast<double>(n_conv) : 0.0;
    summary["mean_ve_converged"] = n_conv ? sum_v / static_cast<double>(n_conv) : 0.0;
    summary["roi_mean_bat"] = map.roi_mean_bat;
    summary["fields"] = {"ktrans", "ve", "kep", "residual", "converged", "bat"};
    write_text(stem + ".summary.json", summary.dump(2) + "\n");
}

ParamMap read_param_map(const std::string& stem) {
    TimeSeriesVolume k = read_volume(stem + "_ktrans");
    TimeSeriesVolume v = read_volume(stem + "_ve");
    TimeSeriesVolume kep = read_volume(stem + "_kep");
    TimeSeriesVolume resid = read_volume(stem + "_residual");
    TimeSeriesVolume conv = read_volume(stem + "_converged");
    TimeSeriesVolume bat = read_volume(stem + "_bat");

    ParamMap map;
    map.dims = k.dims;
    std::size_t n = map.n_voxels();
    if (v.n_voxels() != n || kep.n_voxels() != n || resid.n_voxels() != n ||
        conv.n_voxels() != n || bat.n_voxels() != n)
        throw FormatError("param map containers have mismatched dims");
    map.ktrans.assign(k.data.begin(), k.data.end());
    map.ve.assign(v.data.begin(), v.data.end());
    map.residual.assign(resid.data.begin(), resid.data.end());
    map.kep.resize(n);
    map.converged.resize(n);
    map.bat_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        map.converged[i] = conv.data[i] != 0.0f ? 1 : 0;
        map.bat_index[i] = static_cast<int>(bat.data[i]);
        // kep is re-derived so the in-memory invariant holds exactly even
        // after the float32 round trip of the stored ratio.
        map.kep[i] = map.converged[i] && map.ve[i] > 0.0 ? map.ktrans[i] / map.ve[i]
                                                         : static_cast<double>(kep.data[i]);
    }
    ordered_json summary = ordered_json::parse(read_text(stem + ".summary.json"));
    map.roi_mean_bat = summary.at("roi_mean_bat").get<double>();
    return map;
}

}  // namespace tscf
