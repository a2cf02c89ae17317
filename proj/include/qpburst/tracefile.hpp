#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace qpburst {

// On-disk trace container. 21-byte header:
//   bytes 0-5   magic "QRTRC1"
//   bytes 6-7   format version (u16 LE, currently 1)
//   bytes 8-11  sampling period in nanoseconds (u32 LE)
//   bytes 12-19 record count (u64 LE)
//   byte  20    encoding (0 = two f32 LE per record, 1 = bit-packed states,
//               LSB-first within each byte)
enum class TraceEncoding : std::uint8_t { iq = 0, binary = 1 };

inline constexpr std::uint16_t kTraceFileVersion = 1;
inline constexpr std::uint64_t kTraceFileHeaderSize = 21;

struct TraceFileInfo {
    std::uint16_t version = kTraceFileVersion;
    double ts_us = 0.0;
    std::uint64_t count = 0;
    TraceEncoding encoding = TraceEncoding::iq;
};

struct TraceFileData {
    TraceFileInfo info;
    std::vector<float> iq;          // 2 floats per record (iq encoding)
    std::vector<std::uint8_t> bits;  // 1 byte per record, unpacked (binary encoding)
};

// Incremental writer: header first (count patched on close), then appended
// payload. Binary appends may be any length; partial bytes are carried over.
class TraceFileWriter {
public:
    TraceFileWriter(const std::string& path, double ts_us, TraceEncoding encoding);
    ~TraceFileWriter();
    TraceFileWriter(const TraceFileWriter&) = delete;
    TraceFileWriter& operator=(const TraceFileWriter&) = delete;

    void append_iq(const float* iq, std::uint64_t n_records);
    void append_binary(const std::uint8_t* states, std::uint64_t n_records);
    void close();  // flushes the partial byte and patches the record count

    std::uint64_t count() const { return count_; }

private:
    std::FILE* file_ = nullptr;
    std::string path_;
    TraceEncoding encoding_;
    std::uint64_t count_ = 0;
    std::uint8_t carry_ = 0;  // partial byte of packed states
    int carry_bits_ = 0;
};

void write_trace_file(const std::string& path, double ts_us, const std::vector<float>& iq);
void write_trace_file(const std::string& path, double ts_us,
                      const std::vector<std::uint8_t>& states);

TraceFileInfo read_trace_header(const std::string& path);
// Full decode; validates the payload length against the declared count.
TraceFileData read_trace_file(const std::string& path);

}  // namespace qpburst
