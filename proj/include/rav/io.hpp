#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "rav/gray_image.hpp"
#include "rav/kdtree.hpp"
#include "rav/runtime.hpp"

namespace rav {

/// Malformed input is rejected, never repaired. The kind is stable and
/// testable.
class FormatError : public std::runtime_error {
public:
    enum class Kind {
        bad_magic,
        bad_header,
        bad_maxval,
        truncated,
        bad_value,
        bad_count,
        duplicate_id,
        non_monotone,
    };

    FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Doubles in CSV output carry 9 significant digits so round trips are
/// deterministic.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// PGM (binary P5, maxval 255)
// ---------------------------------------------------------------------------

namespace detail {

// Reads the next header token, skipping whitespace and '#' comment lines.
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) continue;
        break;
    }
    if (c == EOF) throw FormatError(FormatError::Kind::truncated, "pgm: truncated header");
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    // leave the terminator in the stream; the caller owns the separator byte
    if (c != EOF) in.unget();
    return tok;
}

inline int pgm_int(std::istream& in) {
    const std::string tok = pgm_token(in);
    try {
        std::size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError(FormatError::Kind::bad_header, "pgm: non-numeric header field '" + tok + "'");
    }
}

}  // namespace detail

inline GrayImage read_pgm(std::istream& in) {
    const std::string magic = detail::pgm_token(in);
    if (magic != "P5") throw FormatError(FormatError::Kind::bad_magic, "pgm: expected P5, got '" + magic + "'");
    const int width = detail::pgm_int(in);
    const int height = detail::pgm_int(in);
    const int maxval = detail::pgm_int(in);
    if (width < 1 || height < 1)
        throw FormatError(FormatError::Kind::bad_header, "pgm: non-positive dimensions");
    if (maxval != 255)
        throw FormatError(FormatError::Kind::bad_maxval, "pgm: maxval must be 255");
    // exactly one whitespace byte separates header and raster
    const int sep = in.get();
    if (sep == EOF) throw FormatError(FormatError::Kind::truncated, "pgm: missing raster");
    GrayImage img(width, height);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.data.size())
        throw FormatError(FormatError::Kind::truncated, "pgm: truncated raster");
    return img;
}

inline GrayImage read_pgm(const std::string& bytes) {
    std::istringstream in(bytes);
    return read_pgm(in);
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
}

inline std::string write_pgm(const GrayImage& img) {
    std::ostringstream out;
    write_pgm(out, img);
    return out.str();
}

// ---------------------------------------------------------------------------
// Descriptor files: CSV `id,v0,...,v127` and a little-endian binary format
// (8-byte magic "RAVDESC\0", version byte 0x01, u64 record count, then per
// record a u32 id followed by 128 f64 components).
// ---------------------------------------------------------------------------

enum class DescriptorFormat { csv, binary };

inline constexpr char kDescriptorMagic[8] = {'R', 'A', 'V', 'D', 'E', 'S', 'C', '\0'};
inline constexpr std::uint8_t kDescriptorVersion = 1;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(FormatError::Kind::bad_value, "csv: bad number '" + s + "'");
    }
}

inline long parse_long(const std::string& s) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(FormatError::Kind::bad_value, "csv: bad integer '" + s + "'");
    }
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (static_cast<std::size_t>(in.gcount()) != sizeof(T))
        throw FormatError(FormatError::Kind::truncated, "binary descriptors: truncated");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace detail

inline std::vector<Descriptor> read_descriptors_csv(std::istream& in) {
    std::vector<Descriptor> out;
    std::unordered_set<int> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 1 + kDescriptorDim)
            throw FormatError(FormatError::Kind::bad_count,
                              "descriptors: expected 129 fields, got " + std::to_string(fields.size()));
        Descriptor d;
        d.id = static_cast<int>(detail::parse_long(fields[0]));
        for (int i = 0; i < kDescriptorDim; ++i)
            d.values[static_cast<std::size_t>(i)] = detail::parse_double(fields[static_cast<std::size_t>(i) + 1]);
        d.validate();
        if (!seen.insert(d.id).second)
            throw FormatError(FormatError::Kind::duplicate_id,
                              "descriptors: duplicate id " + std::to_string(d.id));
        out.push_back(d);
    }
    return out;
}

inline void write_descriptors_csv(std::ostream& out, const std::vector<Descriptor>& set) {
    for (const auto& d : set) {
        out << d.id;
        for (double v : d.values) out << "," << format_double(v);
        out << "\n";
    }
}

inline std::vector<Descriptor> read_descriptors_binary(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() == 0) return {};  // empty file is an empty set
    if (in.gcount() != 8 || std::memcmp(magic, kDescriptorMagic, 8) != 0)
        throw FormatError(FormatError::Kind::bad_magic, "binary descriptors: bad magic");
    const auto version = detail::read_le<std::uint8_t>(in);
    if (version != kDescriptorVersion)
        throw FormatError(FormatError::Kind::bad_header, "binary descriptors: unsupported version");
    const auto count = detail::read_le<std::uint64_t>(in);
    std::vector<Descriptor> out;
    std::unordered_set<int> seen;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Descriptor d;
        d.id = static_cast<int>(detail::read_le<std::uint32_t>(in));
        for (int j = 0; j < kDescriptorDim; ++j)
            d.values[static_cast<std::size_t>(j)] = detail::read_le<double>(in);
        d.validate();
        if (!seen.insert(d.id).second)
            throw FormatError(FormatError::Kind::duplicate_id,
                              "binary descriptors: duplicate id " + std::to_string(d.id));
        out.push_back(d);
    }
    return out;
}

inline void write_descriptors_binary(std::ostream& out, const std::vector<Descriptor>& set) {
    out.write(kDescriptorMagic, 8);
    detail::write_le<std::uint8_t>(out, kDescriptorVersion);
    detail::write_le<std::uint64_t>(out, set.size());
    for (const auto& d : set) {
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.id));
        for (double v : d.values) detail::write_le<double>(out, v);
    }
}

inline std::vector<Descriptor> read_descriptors(std::istream& in, DescriptorFormat format) {
    return format == DescriptorFormat::csv ? read_descriptors_csv(in) : read_descriptors_binary(in);
}

// ---------------------------------------------------------------------------
// Load trace CSV: header `time_ms,busy_pes`, times strictly ascending.
// ---------------------------------------------------------------------------

inline LoadTrace read_load_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw FormatError(FormatError::Kind::truncated, "load trace: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time_ms,busy_pes")
        throw FormatError(FormatError::Kind::bad_header, "load trace: expected header time_ms,busy_pes");
    LoadTrace trace;
    long long prev = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 2)
            throw FormatError(FormatError::Kind::bad_count, "load trace: expected 2 fields");
        const long t_ms = detail::parse_long(fields[0]);
        const long busy = detail::parse_long(fields[1]);
        if (t_ms <= prev)
            throw FormatError(FormatError::Kind::non_monotone, "load trace: times must be strictly increasing");
        if (busy < 0)
            throw FormatError(FormatError::Kind::bad_value, "load trace: negative busy_pes");
        prev = t_ms;
        trace.entries.push_back({t_ms * us_per_ms, static_cast<int>(busy)});
    }
    // duration stays 0 (hold the last entry forever); the caller sets it to
    // make the trace cyclic
    return trace;
}

inline void write_load_trace(std::ostream& out, const LoadTrace& trace) {
    out << "time_ms,busy_pes\n";
    for (const auto& e : trace.entries)
        out << e.time / us_per_ms << "," << e.busy_pes << "\n";
}

// ---------------------------------------------------------------------------
// Small file helpers
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace rav
