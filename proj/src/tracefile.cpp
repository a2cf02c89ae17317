#include "qpburst/tracefile.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "qpburst/errors.hpp"

namespace qpburst {

namespace {

constexpr char kMagic[6] = {'Q', 'R', 'T', 'R', 'C', '1'};

void put_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::array<std::uint8_t, kTraceFileHeaderSize> make_header(double ts_us, std::uint64_t count,
                                                           TraceEncoding encoding) {
    if (ts_us <= 0.0) throw ConfigError("trace file: sampling period must be positive");
    const double ts_ns = std::round(ts_us * 1000.0);
    if (ts_ns < 1.0 || ts_ns > 4294967295.0)
        throw ConfigError("trace file: sampling period does not fit the header field");

    std::array<std::uint8_t, kTraceFileHeaderSize> h{};
    std::memcpy(h.data(), kMagic, sizeof(kMagic));
    put_u16(h.data() + 6, kTraceFileVersion);
    put_u32(h.data() + 8, static_cast<std::uint32_t>(ts_ns));
    put_u64(h.data() + 12, count);
    h[20] = static_cast<std::uint8_t>(encoding);
    return h;
}

std::uint64_t payload_size(const TraceFileInfo& info) {
    return info.encoding == TraceEncoding::iq ? info.count * 8 : (info.count + 7) / 8;
}

}  // namespace

TraceFileWriter::TraceFileWriter(const std::string& path, double ts_us, TraceEncoding encoding)
    : path_(path), encoding_(encoding) {
    const auto header = make_header(ts_us, 0, encoding);
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) throw ConfigError("trace file: cannot open '" + path + "' for writing");
    if (std::fwrite(header.data(), 1, header.size(), file_) != header.size()) {
        std::fclose(file_);
        file_ = nullptr;
        throw ConfigError("trace file: short write on '" + path + "'");
    }
}

TraceFileWriter::~TraceFileWriter() {
    if (file_) {
        try {
            close();
        } catch (...) {
            std::fclose(file_);
            file_ = nullptr;
        }
    }
}

void TraceFileWriter::append_iq(const float* iq, std::uint64_t n_records) {
    if (encoding_ != TraceEncoding::iq)
        throw ConfigError("trace file: IQ append on a binary-encoded file");
    if (n_records == 0) return;
    // floats are serialized little-endian; this build is little-endian native
    static_assert(sizeof(float) == 4);
    if (std::fwrite(iq, sizeof(float), 2 * n_records, file_) != 2 * n_records)
        throw ConfigError("trace file: short write on '" + path_ + "'");
    count_ += n_records;
}

void TraceFileWriter::append_binary(const std::uint8_t* states, std::uint64_t n_records) {
    if (encoding_ != TraceEncoding::binary)
        throw ConfigError("trace file: binary append on an IQ-encoded file");
    std::vector<std::uint8_t> packed;
    packed.reserve(n_records / 8 + 1);
    for (std::uint64_t i = 0; i < n_records; ++i) {
        carry_ |= static_cast<std::uint8_t>((states[i] != 0) << carry_bits_);
        if (++carry_bits_ == 8) {
            packed.push_back(carry_);
            carry_ = 0;
            carry_bits_ = 0;
        }
    }
    if (!packed.empty() &&
        std::fwrite(packed.data(), 1, packed.size(), file_) != packed.size())
        throw ConfigError("trace file: short write on '" + path_ + "'");
    count_ += n_records;
}

void TraceFileWriter::close() {
    if (!file_) return;
    if (carry_bits_ > 0) {
        if (std::fwrite(&carry_, 1, 1, file_) != 1)
            throw ConfigError("trace file: short write on '" + path_ + "'");
        carry_ = 0;
        carry_bits_ = 0;
    }
    std::uint8_t count_le[8];
    put_u64(count_le, count_);
    if (std::fseek(file_, 12, SEEK_SET) != 0 ||
        std::fwrite(count_le, 1, 8, file_) != 8 || std::fclose(file_) != 0) {
        file_ = nullptr;
        throw ConfigError("trace file: cannot finalize '" + path_ + "'");
    }
    file_ = nullptr;
}

void write_trace_file(const std::string& path, double ts_us, const std::vector<float>& iq) {
    if (iq.size() % 2 != 0)
        throw ConfigError("trace file: IQ payload must hold (I, Q) pairs");
    TraceFileWriter w(path, ts_us, TraceEncoding::iq);
    w.append_iq(iq.data(), iq.size() / 2);
    w.close();
}

void write_trace_file(const std::string& path, double ts_us,
                      const std::vector<std::uint8_t>& states) {
    TraceFileWriter w(path, ts_us, TraceEncoding::binary);
    w.append_binary(states.data(), states.size());
    w.close();
}

TraceFileInfo read_trace_header(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("trace file: cannot open '" + path + "'");
    std::array<std::uint8_t, kTraceFileHeaderSize> h{};
    const std::size_t got = std::fread(h.data(), 1, h.size(), f);
    std::fclose(f);
    if (got < h.size())
        throw FormatError("trace file: truncated header in '" + path + "'", got);
    if (std::memcmp(h.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError("trace file: bad magic in '" + path + "'", 0);

    TraceFileInfo info;
    info.version = get_u16(h.data() + 6);
    if (info.version != kTraceFileVersion)
        throw FormatError("trace file: unsupported version " + std::to_string(info.version) +
                              " in '" + path + "'",
                          6);
    info.ts_us = get_u32(h.data() + 8) / 1000.0;
    info.count = get_u64(h.data() + 12);
    const std::uint8_t enc = h[20];
    if (enc > 1)
        throw FormatError("trace file: unknown encoding " + std::to_string(enc) + " in '" +
                              path + "'",
                          20);
    info.encoding = static_cast<TraceEncoding>(enc);
    return info;
}

TraceFileData read_trace_file(const std::string& path) {
    TraceFileData data;
    data.info = read_trace_header(path);

    const std::uint64_t expected = payload_size(data.info);
    const std::uint64_t actual =
        static_cast<std::uint64_t>(std::filesystem::file_size(path)) - kTraceFileHeaderSize;
    if (actual < expected)
        throw FormatError("trace file: truncated payload in '" + path + "' (" +
                              std::to_string(actual) + " of " + std::to_string(expected) +
                              " bytes)",
                          kTraceFileHeaderSize + actual);
    if (actual > expected)
        throw FormatError("trace file: trailing bytes in '" + path + "'",
                          kTraceFileHeaderSize + expected);

    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("trace file: cannot open '" + path + "'");
    std::fseek(f, static_cast<long>(kTraceFileHeaderSize), SEEK_SET);

    if (data.info.encoding == TraceEncoding::iq) {
        data.iq.resize(2 * data.info.count);
        if (std::fread(data.iq.data(), sizeof(float), data.iq.size(), f) != data.iq.size()) {
            std::fclose(f);
            throw FormatError("trace file: read failure in '" + path + "'",
                              kTraceFileHeaderSize);
        }
    } else {
        std::vector<std::uint8_t> packed(expected);
        if (!packed.empty() &&
            std::fread(packed.data(), 1, packed.size(), f) != packed.size()) {
            std::fclose(f);
            throw FormatError("trace file: read failure in '" + path + "'",
                              kTraceFileHeaderSize);
        }
        data.bits.resize(data.info.count);
        for (std::uint64_t i = 0; i < data.info.count; ++i)
            data.bits[i] = (packed[i >> 3] >> (i & 7)) & 1;
    }
    std::fclose(f);
    return data;
}

}  // namespace qpburst
