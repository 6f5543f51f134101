#pragma once

// Field2D raster exchange: headerless CSV (ny rows x nx columns) with a JSON
// sidecar {nx, ny, element_size}, and 8-bit binary PGM for viewing.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lenscale/core.hpp"
#include "lenscale/fields.hpp"

namespace lenscale::io {

/// Shortest round-trip decimal representation; stable across runs.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    return p;
}

inline void write_field_csv(const std::filesystem::path& path, const Field2D& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (std::size_t j = 0; j < f.ny(); ++j) {
        for (std::size_t i = 0; i < f.nx(); ++i) {
            if (i) out << ',';
            out << format_double(f.at(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline void write_field_metadata(const std::filesystem::path& path, const Field2D& f) {
    nlohmann::ordered_json meta;
    meta["nx"] = f.nx();
    meta["ny"] = f.ny();
    meta["element_size"] = f.element_size();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << meta.dump(2) << '\n';
}

/// Writes `<stem>.csv` and its `<stem>.json` sidecar; returns both paths.
inline std::pair<std::filesystem::path, std::filesystem::path> write_raster(
    const std::filesystem::path& csv_path, const Field2D& f) {
    write_field_csv(csv_path, f);
    const auto meta = sidecar_path(csv_path);
    write_field_metadata(meta, f);
    return {csv_path, meta};
}

/// Reads a CSV raster. Dimensions come from the sidecar when present and are
/// cross-checked against the CSV shape; otherwise they are inferred.
inline Field2D read_raster(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw IoError("cannot open raster: " + csv_path.string());
    std::vector<double> values;
    std::size_t rows = 0, cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t count = 0;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            if (b == std::string::npos) throw IoError("empty cell in raster " + csv_path.string());
            const std::string tok = cell.substr(b, e - b + 1);
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || ptr != tok.data() + tok.size())
                throw IoError("bad number '" + tok + "' in raster " + csv_path.string());
            values.push_back(v);
            ++count;
        }
        if (rows == 0) cols = count;
        else if (count != cols)
            throw IoError("ragged raster row " + std::to_string(rows + 1) + " in " + csv_path.string());
        ++rows;
    }
    if (rows == 0 || cols == 0) throw IoError("empty raster file: " + csv_path.string());

    double element_size = 1.0;
    const auto meta_path = sidecar_path(csv_path);
    if (std::filesystem::exists(meta_path)) {
        std::ifstream mi(meta_path);
        nlohmann::json meta;
        try {
            mi >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("bad raster metadata " + meta_path.string() + ": " + e.what());
        }
        const auto nx = meta.at("nx").get<std::size_t>();
        const auto ny = meta.at("ny").get<std::size_t>();
        if (nx != cols || ny != rows)
            throw IoError("raster metadata " + std::to_string(nx) + "x" + std::to_string(ny) +
                          " disagrees with CSV shape " + std::to_string(cols) + "x" +
                          std::to_string(rows));
        element_size = meta.value("element_size", 1.0);
    }
    return Field2D(cols, rows, std::move(values), element_size);
}

struct PgmMarker {
    std::size_t i = 0;
    std::size_t j = 0;
    std::uint8_t gray = 128;
};

/// Binary PGM; solid (1) renders black, void (0) white. Markers overwrite
/// single pixels so minimizer locations stay visible.
inline void write_pgm(const std::filesystem::path& path, const Field2D& f,
                      const std::vector<PgmMarker>& markers = {}) {
    std::vector<std::uint8_t> px(f.size());
    for (std::size_t e = 0; e < f.size(); ++e) {
        const double v = f.values()[e];
        px[e] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - v)));
    }
    for (const auto& m : markers)
        if (m.i < f.nx() && m.j < f.ny()) px[f.index(m.i, m.j)] = m.gray;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "P5\n" << f.nx() << ' ' << f.ny() << "\n255\n";
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace lenscale::io
