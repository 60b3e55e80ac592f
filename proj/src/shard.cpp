#include "hsprobe/shard.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>
#include <zlib.h>

namespace hsprobe {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "shard blobs are little-endian; big-endian hosts need byte swaps");
static_assert(sizeof(Half) == 2, "half-precision storage must be 16 bit");

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string sidecar_path(const std::string& blob_path) {
    fs::path p(blob_path);
    p.replace_extension(".jsonl");
    return p.string();
}

}  // namespace

std::uint32_t crc32_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for checksum: " + path);
    uLong crc = crc32(0L, Z_NULL, 0);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf),
                    static_cast<uInt>(in.gcount()));
    return static_cast<std::uint32_t>(crc);
}

ShardEntry write_shard(const std::string& blob_path, const std::vector<SampleRecord>& records,
                       const ShapeConfig& shape) {
    shape.validate();
    if (records.empty()) throw DataError("write_shard: shards are non-empty");
    if (records.size() > 0xffff)
        throw ConfigError("write_shard: shard holds at most 65535 records");
    for (const auto& r : records) {
        if (!(r.hidden.shape() == shape))
            throw ConfigError("write_shard: record '" + r.sample_id +
                              "' does not match the shard shape");
        if (r.hidden.token_count() != r.token_count)
            throw DataError("write_shard: record '" + r.sample_id +
                            "' token_count disagrees with its tensor");
    }

    std::string header;
    header.reserve(16);
    put_u32(header, kShardMagic);
    put_u16(header, kShardVersion);
    put_u16(header, static_cast<std::uint16_t>(records.size()));
    put_u16(header, static_cast<std::uint16_t>(shape.layers));
    put_u16(header, static_cast<std::uint16_t>(shape.tokens_fixed));
    put_u32(header, static_cast<std::uint32_t>(shape.hidden));

    std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
    if (!blob) throw DataError("cannot write shard blob: " + blob_path);
    blob.write(header.data(), static_cast<std::streamsize>(header.size()));
    const std::size_t bytes_per = static_cast<std::size_t>(shape.elements()) * sizeof(Half);
    for (const auto& r : records)
        blob.write(reinterpret_cast<const char*>(r.hidden.data()),
                   static_cast<std::streamsize>(bytes_per));
    blob.close();
    if (!blob) throw DataError("short write on shard blob: " + blob_path);

    std::ofstream meta(sidecar_path(blob_path), std::ios::trunc);
    if (!meta) throw DataError("cannot write shard sidecar: " + sidecar_path(blob_path));
    for (const auto& r : records) meta << record_meta_to_json(r) << "\n";
    meta.close();
    if (!meta) throw DataError("short write on shard sidecar");

    ShardEntry e;
    e.path = fs::path(blob_path).filename().string();
    e.sample_count = static_cast<int>(records.size());
    e.first_id = records.front().sample_id;
    e.last_id = records.back().sample_id;
    e.checksum = crc32_file(blob_path);
    e.meta_checksum = crc32_file(sidecar_path(blob_path));
    return e;
}

std::vector<SampleRecord> read_shard(const std::string& blob_path,
                                     const ShapeConfig* expected_shape) {
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw DataError("cannot open shard blob: " + blob_path);
    unsigned char header[16];
    if (!blob.read(reinterpret_cast<char*>(header), sizeof header))
        throw DataError("shard blob too short for its header: " + blob_path);
    if (get_u32(header) != kShardMagic)
        throw DataError("bad shard magic in " + blob_path);
    if (get_u16(header + 4) != kShardVersion)
        throw DataError("unsupported shard version in " + blob_path);
    const int n = get_u16(header + 6);
    ShapeConfig shape;
    shape.layers = get_u16(header + 8);
    shape.tokens_fixed = get_u16(header + 10);
    shape.hidden = static_cast<int>(get_u32(header + 12));
    shape.validate();
    if (expected_shape && !(shape == *expected_shape))
        throw DataError("shard shape disagrees with the manifest: " + blob_path);

    std::ifstream meta(sidecar_path(blob_path));
    if (!meta) throw DataError("missing shard sidecar: " + sidecar_path(blob_path));
    std::vector<SampleRecord> records;
    records.reserve(n);
    std::string line;
    while (std::getline(meta, line)) {
        if (line.empty()) continue;
        records.push_back(record_meta_from_json(line));
    }
    if (static_cast<int>(records.size()) != n)
        throw DataError("shard sidecar record count disagrees with the blob header: " +
                        blob_path);

    const std::size_t bytes_per = static_cast<std::size_t>(shape.elements()) * sizeof(Half);
    for (auto& r : records) {
        r.hidden = HiddenStateTensor(shape, r.token_count);
        if (!blob.read(reinterpret_cast<char*>(r.hidden.data()),
                       static_cast<std::streamsize>(bytes_per)))
            throw DataError("shard blob truncated: " + blob_path);
    }
    blob.peek();
    if (!blob.eof()) throw DataError("shard blob has trailing bytes: " + blob_path);
    return records;
}

// ---------------------------------------------------------------------------
// Manifest

std::string ShardManifest::to_json() const {
    json j;
    j["format_version"] = 1;
    j["shard_size"] = shard_size;
    j["shape"] = {{"layers", shape.layers},
                  {"tokens_fixed", shape.tokens_fixed},
                  {"hidden", shape.hidden}};
    j["complete"] = complete;
    j["entries"] = json::array();
    for (const auto& e : entries)
        j["entries"].push_back({{"path", e.path},
                                {"sample_count", e.sample_count},
                                {"first_id", e.first_id},
                                {"last_id", e.last_id},
                                {"checksum", e.checksum},
                                {"meta_checksum", e.meta_checksum}});
    j["splits"] = splits;
    j["skipped"] = json::array();
    for (const auto& s : skipped)
        j["skipped"].push_back({{"sample_id", s.sample_id}, {"reason", s.reason}});
    return j.dump(2);
}

ShardManifest ShardManifest::from_json(const std::string& text) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("manifest is not valid JSON");
    ShardManifest m;
    try {
        m.shard_size = j.at("shard_size").get<int>();
        m.shape.layers = j.at("shape").at("layers").get<int>();
        m.shape.tokens_fixed = j.at("shape").at("tokens_fixed").get<int>();
        m.shape.hidden = j.at("shape").at("hidden").get<int>();
        m.complete = j.at("complete").get<bool>();
        for (const auto& e : j.at("entries")) {
            ShardEntry entry;
            entry.path = e.at("path").get<std::string>();
            entry.sample_count = e.at("sample_count").get<int>();
            entry.first_id = e.at("first_id").get<std::string>();
            entry.last_id = e.at("last_id").get<std::string>();
            entry.checksum = e.at("checksum").get<std::uint32_t>();
            entry.meta_checksum = e.at("meta_checksum").get<std::uint32_t>();
            m.entries.push_back(std::move(entry));
        }
        m.splits = j.at("splits").get<std::map<std::string, std::string>>();
        for (const auto& s : j.at("skipped"))
            m.skipped.push_back({s.at("sample_id").get<std::string>(),
                                 s.at("reason").get<std::string>()});
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest field error: ") + e.what());
    }
    return m;
}

void ShardManifest::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw DataError("cannot write manifest: " + tmp);
        out << to_json() << "\n";
    }
    fs::rename(tmp, path);
}

ShardManifest ShardManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

// ---------------------------------------------------------------------------
// DatasetWriter

DatasetWriter::DatasetWriter(std::string directory, ShapeConfig shape, int shard_size)
    : dir_(std::move(directory)) {
    shape.validate();
    if (shard_size < 1) throw ConfigError("DatasetWriter: shard_size must be >= 1");
    fs::create_directories(dir_);

    const auto manifest_path = fs::path(dir_) / "manifest.json";
    if (fs::exists(manifest_path)) {
        manifest_ = ShardManifest::load(manifest_path.string());
        if (!(manifest_.shape == shape) || manifest_.shard_size != shard_size)
            throw ConfigError("existing dataset at '" + dir_ +
                              "' was built with a different shape or shard size");
        // Trust but verify: every listed shard must still be intact.
        for (const auto& e : manifest_.entries) {
            const auto blob = (fs::path(dir_) / e.path).string();
            if (crc32_file(blob) != e.checksum)
                throw DataError("resume found a corrupt shard: " + blob);
            for (const auto& r : read_shard(blob, &manifest_.shape)) {
                seen_.insert(r.sample_id);
                hybrid_by_id_[r.sample_id] = r.labels.hybrid_label;
            }
        }
        for (const auto& s : manifest_.skipped) seen_.insert(s.sample_id);
    } else {
        manifest_.shard_size = shard_size;
        manifest_.shape = shape;
    }
}

std::string DatasetWriter::shard_name(std::size_t index) const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "shard_%05zu.bin", index);
    return buf;
}

void DatasetWriter::append(SampleRecord record) {
    if (finalized_ || manifest_.complete)
        throw ConfigError("DatasetWriter: append after finalize");
    if (seen_.count(record.sample_id))
        throw DataError("duplicate sample_id '" + record.sample_id + "'");
    seen_.insert(record.sample_id);
    hybrid_by_id_[record.sample_id] = record.labels.hybrid_label;
    buffer_.push_back(std::move(record));
    if (static_cast<int>(buffer_.size()) == manifest_.shard_size) flush();
}

void DatasetWriter::record_skip(const std::string& sample_id, const std::string& reason) {
    if (finalized_ || manifest_.complete)
        throw ConfigError("DatasetWriter: skip after finalize");
    seen_.insert(sample_id);
    manifest_.skipped.push_back({sample_id, reason});
}

void DatasetWriter::flush() {
    if (buffer_.empty()) return;
    const auto name = shard_name(manifest_.entries.size());
    auto entry = write_shard((fs::path(dir_) / name).string(), buffer_, manifest_.shape);
    entry.path = name;
    manifest_.entries.push_back(entry);
    buffer_.clear();
    save_manifest();
}

void DatasetWriter::save_manifest() const {
    manifest_.save((fs::path(dir_) / "manifest.json").string());
}

ShardManifest DatasetWriter::finalize(std::map<std::string, std::string> splits) {
    if (finalized_) throw ConfigError("DatasetWriter: finalize called twice");
    if (!manifest_.complete) {
        flush();
        for (const auto& [id, tag] : splits) {
            if (tag != "train_dev" && tag != "test")
                throw ConfigError("split tag must be train_dev or test, got '" + tag + "'");
            if (!seen_.count(id))
                throw DataError("split tag names unknown sample_id '" + id + "'");
        }
        manifest_.splits = std::move(splits);
        manifest_.complete = true;
        save_manifest();
    }
    finalized_ = true;
    return manifest_;
}

std::vector<SampleRecord> load_dataset_records(const std::string& directory,
                                               const ShardManifest& manifest) {
    std::vector<SampleRecord> all;
    all.reserve(static_cast<std::size_t>(manifest.total_samples()));
    for (const auto& e : manifest.entries) {
        const auto blob = (fs::path(directory) / e.path).string();
        if (crc32_file(blob) != e.checksum)
            throw DataError("shard checksum mismatch (corruption): " + blob);
        const auto meta = fs::path(blob).replace_extension(".jsonl").string();
        if (crc32_file(meta) != e.meta_checksum)
            throw DataError("shard sidecar checksum mismatch (corruption): " + meta);
        auto records = read_shard(blob, &manifest.shape);
        if (static_cast<int>(records.size()) != e.sample_count)
            throw DataError("shard record count disagrees with the manifest: " + blob);
        for (auto& r : records) all.push_back(std::move(r));
    }
    return all;
}

}  // namespace hsprobe
