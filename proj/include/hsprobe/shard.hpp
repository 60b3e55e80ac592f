#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hsprobe/record.hpp"

namespace hsprobe {

/// Shard blob layout: a 16-byte little-endian header
///   magic "HSSH" (u32) | version (u16) | n (u16) | L (u16) | T_fixed (u16) | D (u32)
/// followed by n tensors of L*T_fixed*D half-precision values in C order
/// (layer, token, channel). Record metadata lives in a sidecar JSONL file
/// next to the blob (same stem, .jsonl extension), one line per record in
/// blob order.
inline constexpr std::uint32_t kShardMagic = 0x48535348u;  // "HSSH" little-endian
inline constexpr std::uint16_t kShardVersion = 1;

/// One manifest row describing a flushed shard.
struct ShardEntry {
    std::string path;  // blob path relative to the dataset directory
    int sample_count = 0;
    std::string first_id;
    std::string last_id;
    std::uint32_t checksum = 0;       // CRC-32 of the blob file
    std::uint32_t meta_checksum = 0;  // CRC-32 of the sidecar file
};

struct SkippedSample {
    std::string sample_id;
    std::string reason;
};

/// Dataset-level index: shard table, tensor shape, split tags and skips.
struct ShardManifest {
    int shard_size = 500;
    ShapeConfig shape;
    bool complete = false;
    std::vector<ShardEntry> entries;
    std::map<std::string, std::string> splits;  // sample_id -> train_dev | test
    std::vector<SkippedSample> skipped;

    std::int64_t total_samples() const {
        std::int64_t n = 0;
        for (const auto& e : entries) n += e.sample_count;
        return n;
    }

    std::string to_json() const;
    static ShardManifest from_json(const std::string& text);
    void save(const std::string& path) const;  // atomic: tmp + rename
    static ShardManifest load(const std::string& path);
};

/// CRC-32 (zlib polynomial) of a whole file.
std::uint32_t crc32_file(const std::string& path);

/// Writes one shard: blob + sidecar. Records must be non-empty and share
/// `shape`. Returns the manifest row (path stored as given).
ShardEntry write_shard(const std::string& blob_path, const std::vector<SampleRecord>& records,
                       const ShapeConfig& shape);

/// Reads a shard back. The blob header must match `shape` when provided.
/// Bit-exact inverse of write_shard, including half tensor bytes.
std::vector<SampleRecord> read_shard(const std::string& blob_path,
                                     const ShapeConfig* expected_shape = nullptr);

/// Streams records into numbered shards under a directory, flushing every
/// `shard_size` records, and maintains manifest.json after each flush so an
/// interrupted build resumes where the last complete shard ended. Records
/// buffered but not yet flushed are lost on a crash and must be re-appended;
/// append order must be deterministic for resume to reproduce the same
/// shards.
class DatasetWriter {
public:
    DatasetWriter(std::string directory, ShapeConfig shape, int shard_size = 500);

    /// Ids already materialized in complete shards (resume fast-forward),
    /// plus previously skipped ids.
    const std::set<std::string>& seen_ids() const { return seen_; }
    /// Hybrid label of every materialized record (previous runs included),
    /// for split assignment at finalize time.
    const std::map<std::string, int>& hybrid_labels_by_id() const { return hybrid_by_id_; }
    const ShapeConfig& shape() const { return manifest_.shape; }
    bool complete() const { return manifest_.complete; }
    std::int64_t written() const { return manifest_.total_samples(); }

    void append(SampleRecord record);
    void record_skip(const std::string& sample_id, const std::string& reason);

    /// Flushes the final partial shard, stamps split tags, marks the
    /// manifest complete and writes it. No appends afterwards.
    ShardManifest finalize(std::map<std::string, std::string> splits = {});

private:
    void flush();
    void save_manifest() const;
    std::string shard_name(std::size_t index) const;

    std::string dir_;
    ShardManifest manifest_;
    std::vector<SampleRecord> buffer_;
    std::set<std::string> seen_;
    std::map<std::string, int> hybrid_by_id_;
    bool finalized_ = false;
};

/// Loads every shard listed in a dataset directory's manifest, verifying
/// checksums and shape. Returns records in shard order.
std::vector<SampleRecord> load_dataset_records(const std::string& directory,
                                               const ShardManifest& manifest);

}  // namespace hsprobe
