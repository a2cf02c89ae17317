#pragma once

#include <cstdint>
#include <vector>

namespace qpburst {

// Readout streams are segmented into fixed-length traces; a shorter final
// block is discarded by the pipeline rather than padded.
inline constexpr std::uint64_t kTraceLength = 1'000'000;

// Raw I/Q trace: interleaved (I, Q) detector-unit pairs.
struct Trace {
    std::vector<float> iq;  // 2 floats per record
    std::uint64_t index = 0;
    double ts_us = 0.0;

    std::uint64_t size() const { return iq.size() / 2; }
};

// Thresholded stream: one byte per record, 0 = ground.
struct BinaryTrace {
    std::vector<std::uint8_t> bits;
    std::uint64_t parent_index = 0;
    double ts_us = 0.0;
    bool quality_ok = true;

    std::uint64_t size() const { return bits.size(); }

    // Measured P(g): fraction of ground outcomes.
    double ground_fraction() const {
        if (bits.empty()) return 0.0;
        std::uint64_t zeros = 0;
        for (const auto b : bits) zeros += (b == 0);
        return static_cast<double>(zeros) / static_cast<double>(bits.size());
    }
};

}  // namespace qpburst
