// Copyright 2026 The TextPortal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Snapshot layout (one directory per user):
//
//   manifest.json   {"format","version","user_id","feature_dim","record_count",
//                    "segments":[{"name","file","bytes","crc32"}]}
//   records.jsonl   one record per line, UTF-8, row i <-> vector row i
//   vectors.bin     "TPVF" | version u32 | dim u32 | rows x dim float32 (LE)
//   <name>.json     optional extra segments (collection, model parameters)

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "textportal/memory.hpp"

namespace textportal {

namespace {

constexpr std::array<char, 4> kVectorMagic{'T', 'P', 'V', 'F'};
constexpr const char* kFormatName = "textportal-store";
constexpr std::size_t kVectorHeaderBytes = 12;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

std::uint32_t crc_of(const std::string& bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + p.string());
}

std::string read_file(const std::filesystem::path& p, ErrorCode on_missing) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(on_missing, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string encode_vectors(const std::vector<std::shared_ptr<const UsageRecord>>& records, std::size_t dim) {
    std::string out(kVectorMagic.begin(), kVectorMagic.end());
    put_u32(out, kSnapshotVersion);
    put_u32(out, static_cast<std::uint32_t>(dim));
    out.reserve(out.size() + records.size() * dim * 4);
    for (const auto& r : records) {
        for (float f : r->feature) put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

}  // namespace

void save_database(const PersonalDatabase& db, const std::filesystem::path& dir,
                   const std::map<std::string, nlohmann::json>& extra) {
    const auto records = db.snapshot();

    std::string jsonl;
    for (const auto& r : records) {
        jsonl += record_to_json(*r).dump();
        jsonl.push_back('\n');
    }
    std::map<std::string, std::pair<std::string, std::string>> segments;  // name -> (file, bytes)
    segments["records"] = {"records.jsonl", std::move(jsonl)};
    segments["vectors"] = {"vectors.bin", encode_vectors(records, db.feature_dim())};
    for (const auto& [name, doc] : extra) {
        if (name == "records" || name == "vectors" || name == "manifest") {
            throw Error(ErrorCode::kInvalidArgument, "reserved segment name " + name);
        }
        segments[name] = {name + ".json", doc.dump(2)};
    }

    nlohmann::json manifest{{"format", kFormatName},
                            {"version", kSnapshotVersion},
                            {"user_id", db.user_id()},
                            {"feature_dim", db.feature_dim()},
                            {"record_count", records.size()},
                            {"segments", nlohmann::json::array()}};
    for (const auto& [name, seg] : segments) {
        manifest["segments"].push_back(
            {{"name", name}, {"file", seg.first}, {"bytes", seg.second.size()}, {"crc32", crc_of(seg.second)}});
    }

    // Write everything next to the target, then swap directories.
    auto tmp = dir;
    tmp += ".tmp";
    std::filesystem::remove_all(tmp);
    std::filesystem::create_directories(tmp);
    for (const auto& [_, seg] : segments) write_file(tmp / seg.first, seg.second);
    write_file(tmp / "manifest.json", manifest.dump(2));

    auto old = dir;
    old += ".old";
    std::filesystem::remove_all(old);
    if (std::filesystem::exists(dir)) std::filesystem::rename(dir, old);
    std::filesystem::rename(tmp, dir);
    std::filesystem::remove_all(old);
}

LoadedDatabase load_database(const std::filesystem::path& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(dir / "manifest.json", ErrorCode::kCorruptSnapshot));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kCorruptSnapshot, std::string("manifest: ") + e.what());
    }

    std::map<std::string, std::string> blobs;
    std::string user_id;
    std::size_t dim = 0;
    std::size_t count = 0;
    try {
        if (manifest.at("format").get<std::string>() != kFormatName) {
            throw Error(ErrorCode::kCorruptSnapshot, "not a textportal snapshot");
        }
        const auto version = manifest.at("version").get<std::uint32_t>();
        if (version != kSnapshotVersion) {
            throw Error(ErrorCode::kVersionMismatch, "snapshot version " + std::to_string(version) +
                                                         ", supported " + std::to_string(kSnapshotVersion));
        }
        user_id = manifest.at("user_id").get<std::string>();
        dim = manifest.at("feature_dim").get<std::size_t>();
        count = manifest.at("record_count").get<std::size_t>();
        for (const auto& seg : manifest.at("segments")) {
            const auto name = seg.at("name").get<std::string>();
            auto bytes = read_file(dir / seg.at("file").get<std::string>(), ErrorCode::kCorruptSnapshot);
            if (bytes.size() != seg.at("bytes").get<std::size_t>()) {
                throw Error(ErrorCode::kCorruptSnapshot, "segment " + name + " has the wrong size");
            }
            if (crc_of(bytes) != seg.at("crc32").get<std::uint32_t>()) {
                throw Error(ErrorCode::kCorruptSnapshot, "segment " + name + " fails its checksum");
            }
            blobs[name] = std::move(bytes);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kCorruptSnapshot, std::string("manifest: ") + e.what());
    }
    if (!blobs.contains("records") || !blobs.contains("vectors")) {
        throw Error(ErrorCode::kCorruptSnapshot, "snapshot is missing a required segment");
    }

    const std::string& vec = blobs["vectors"];
    if (vec.size() < kVectorHeaderBytes || std::memcmp(vec.data(), kVectorMagic.data(), 4) != 0) {
        throw Error(ErrorCode::kCorruptSnapshot, "vector sidecar has a bad header");
    }
    if (get_u32(vec, 4) != kSnapshotVersion) {
        throw Error(ErrorCode::kVersionMismatch, "vector sidecar version " + std::to_string(get_u32(vec, 4)));
    }
    if (get_u32(vec, 8) != dim || vec.size() != kVectorHeaderBytes + count * dim * 4) {
        throw Error(ErrorCode::kCorruptSnapshot, "vector sidecar does not match the manifest");
    }

    auto db = std::make_unique<PersonalDatabase>(user_id, dim);
    std::istringstream lines(blobs["records"]);
    std::string line;
    std::size_t row = 0;
    try {
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            if (row >= count) throw Error(ErrorCode::kCorruptSnapshot, "more records than vectors");
            UsageRecord r = record_from_json(nlohmann::json::parse(line));
            r.feature.resize(dim);
            const std::size_t base = kVectorHeaderBytes + row * dim * 4;
            for (std::size_t i = 0; i < dim; ++i) r.feature[i] = std::bit_cast<float>(get_u32(vec, base + i * 4));
            db->append(std::move(r));
            ++row;
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kCorruptSnapshot, std::string("records: ") + e.what());
    }
    if (row != count) throw Error(ErrorCode::kCorruptSnapshot, "fewer records than the manifest says");

    LoadedDatabase out{std::move(db), {}};
    for (auto& [name, bytes] : blobs) {
        if (name == "records" || name == "vectors") continue;
        try {
            out.extra[name] = nlohmann::json::parse(bytes);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::kCorruptSnapshot, "segment " + name + ": " + e.what());
        }
    }
    return out;
}

std::vector<UsageRecord> load_record_pool(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read record pool " + file.string());
    std::vector<UsageRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::kInvalidArgument,
                        file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_record_pool(const std::filesystem::path& file, std::span<const UsageRecord> records) {
    std::ofstream out(file, std::ios::trunc);
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + file.string());
}

}  // namespace textportal
