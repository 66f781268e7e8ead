#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>

#include "forkstore/chunk.hpp"
#include "forkstore/chunk_store.hpp"

namespace forkstore {

namespace fs = std::filesystem;

inline constexpr char kLogMagic[4] = {'F', 'K', 'B', '1'};
inline constexpr char kIndexMagic[4] = {'F', 'K', 'B', 'I'};
// Magic plus the one-byte manifest record (digest algorithm id).
inline constexpr std::size_t kLogHeaderSize = 5;

namespace detail {

class File {
 public:
  File() = default;
  File(const fs::path& path, int flags, mode_t mode = 0644) : fd_(::open(path.c_str(), flags | O_CLOEXEC, mode)) {
    if (fd_ < 0) throw Error(ErrorCode::Io, "open " + path.string() + ": " + std::strerror(errno));
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
  File(File&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  File& operator=(File&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~File() { close(); }

  int fd() const { return fd_; }
  bool is_open() const { return fd_ >= 0; }

  std::uint64_t size() const {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) throw Error(ErrorCode::Io, std::string("fstat: ") + std::strerror(errno));
    return static_cast<std::uint64_t>(st.st_size);
  }

  // Returns the number of bytes actually read (short at end of file).
  std::size_t read_at(std::uint64_t off, std::uint8_t* buf, std::size_t n) const {
    std::size_t done = 0;
    while (done < n) {
      ssize_t r = ::pread(fd_, buf + done, n - done, static_cast<off_t>(off + done));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::Io, std::string("pread: ") + std::strerror(errno));
      }
      if (r == 0) break;
      done += static_cast<std::size_t>(r);
    }
    return done;
  }

  void write_at(std::uint64_t off, const std::uint8_t* buf, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
      ssize_t r = ::pwrite(fd_, buf + done, n - done, static_cast<off_t>(off + done));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::Io, std::string("pwrite: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(r);
    }
  }

  void truncate(std::uint64_t n) {
    if (::ftruncate(fd_, static_cast<off_t>(n)) != 0)
      throw Error(ErrorCode::Io, std::string("ftruncate: ") + std::strerror(errno));
  }

  void sync() {
    if (::fsync(fd_) != 0) throw Error(ErrorCode::Io, std::string("fsync: ") + std::strerror(errno));
  }

 private:
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
};

}  // namespace detail

/// Outcome of walking a chunk log from the first record to the end of file.
struct LogScanReport {
  std::uint64_t records = 0;
  std::uint64_t valid_end = kLogHeaderSize;  // offset just past the last complete record
  bool truncated = false;                    // a torn trailing record was skipped
  std::uint64_t truncated_bytes = 0;
};

/// Walks the records of `chunks.log` in append order. Records are
/// `serialize_chunk` bytes laid end to end after the file header; a torn final
/// record is reported and skipped. `from` must be a record boundary.
inline LogScanReport scan_chunk_log(const detail::File& file, DigestAlgorithm algo,
                                    const std::function<void(const Cid&, Chunk&&, std::uint64_t)>& fn,
                                    std::uint64_t from = kLogHeaderSize) {
  LogScanReport report;
  const std::uint64_t size = file.size();
  std::uint64_t off = from;
  Bytes buf;
  while (off < size) {
    std::uint8_t header[kChunkHeaderSize];
    if (size - off < kChunkHeaderSize) break;
    file.read_at(off, header, kChunkHeaderSize);
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(header[2 + i]) << (8 * i);
    const std::uint64_t rec = kChunkHeaderSize + static_cast<std::uint64_t>(n);
    if (size - off < rec) break;
    buf.resize(rec);
    file.read_at(off, buf.data(), rec);
    Chunk c = deserialize_chunk(buf);
    Cid cid = compute_cid(c, algo);
    if (fn) fn(cid, std::move(c), off);
    ++report.records;
    off += rec;
  }
  report.valid_end = off;
  if (off < size) {
    report.truncated = true;
    report.truncated_bytes = size - off;
  }
  return report;
}

/// Durable, log-structured chunk store.
///
/// Directory layout: `chunks.log` (magic "FKB1", digest id byte, then chunk
/// records) and an optional `chunks.idx` sidecar mapping cids to record
/// extents. The in-memory index is rebuilt from the log tail not covered by the
/// sidecar when the store opens.
class LogChunkStore final : public ChunkStore {
 public:
  struct Options {
    std::optional<DigestAlgorithm> digest;  // unset: adopt the existing log's, else SHA-256
    bool sync_every_put = false;
    bool read_only = false;
  };

  struct Extent {
    std::uint64_t offset = 0;
    std::uint32_t length = 0;  // header + payload
    ChunkType type = ChunkType::Blob;
  };

  explicit LogChunkStore(const fs::path& dir) : LogChunkStore(dir, Options{}) {}

  LogChunkStore(const fs::path& dir, Options opts) : dir_(dir), opts_(opts) {
    std::error_code ec;
    if (!opts_.read_only) fs::create_directories(dir_, ec);
    const fs::path log_path = dir_ / "chunks.log";
    const bool fresh = !fs::exists(log_path) || fs::file_size(log_path) == 0;
    if (fresh && opts_.read_only) throw Error(ErrorCode::NotFound, "no chunk log at " + log_path.string());
    file_ = detail::File(log_path, opts_.read_only ? O_RDONLY : (O_RDWR | O_CREAT));

    if (fresh) {
      algo_ = opts_.digest.value_or(DigestAlgorithm::Sha256);
      std::uint8_t header[kLogHeaderSize] = {static_cast<std::uint8_t>(kLogMagic[0]),
                                             static_cast<std::uint8_t>(kLogMagic[1]),
                                             static_cast<std::uint8_t>(kLogMagic[2]),
                                             static_cast<std::uint8_t>(kLogMagic[3]),
                                             static_cast<std::uint8_t>(algo_)};
      file_.write_at(0, header, kLogHeaderSize);
      if (opts_.sync_every_put) file_.sync();
      end_ = kLogHeaderSize;
    } else {
      std::uint8_t header[kLogHeaderSize];
      if (file_.read_at(0, header, kLogHeaderSize) != kLogHeaderSize ||
          std::memcmp(header, kLogMagic, 4) != 0)
        throw Error(ErrorCode::Corrupt, "bad chunk log magic in " + log_path.string());
      algo_ = digest_from_id(header[4]);
      if (opts_.digest && *opts_.digest != algo_)
        throw Error(ErrorCode::InvalidArgument, "store uses " + std::string(digest_name(algo_)) +
                                                    ", refusing to mix digest algorithms");
      recover();
    }
  }

  ~LogChunkStore() override {
    try {
      if (!opts_.read_only) write_index();
    } catch (...) {
    }
  }

  LogChunkStore(const LogChunkStore&) = delete;
  LogChunkStore& operator=(const LogChunkStore&) = delete;

  DigestAlgorithm digest() const override { return algo_; }

  Cid put(const Chunk& chunk) override {
    if (opts_.read_only) throw Error(ErrorCode::Io, "store opened read-only");
    Bytes rec = serialize_chunk(chunk);
    Cid cid = digest_of(rec, algo_);
    std::unique_lock lock(mu_);
    if (index_.count(cid)) {
      ++stats_.dedup_hit_count;
      return cid;
    }
    if (file_.size() < end_) throw Error(ErrorCode::Corrupt, "chunk log shrank underneath the store");
    file_.write_at(end_, rec.data(), rec.size());
    if (opts_.sync_every_put) file_.sync();
    index_.emplace(cid, Extent{end_, static_cast<std::uint32_t>(rec.size()), chunk.type});
    end_ += rec.size();
    stats_.account(chunk);
    return cid;
  }

  Chunk get(const Cid& cid, bool verify = false) const override {
    Extent ext = extent(cid);
    Bytes rec(ext.length);
    const std::size_t got = file_.read_at(ext.offset, rec.data(), rec.size());
    if (got != rec.size()) {
      if (verify) throw Error(ErrorCode::TamperDetected, "chunk " + cid.hex() + " record is truncated");
      throw Error(ErrorCode::Corrupt, "chunk " + cid.hex() + " record is truncated");
    }
    if (verify && digest_of(rec, algo_) != cid)
      throw Error(ErrorCode::TamperDetected, "chunk " + cid.hex() + " does not match its digest");
    return deserialize_chunk(rec);
  }

  bool contains(const Cid& cid) const override {
    std::shared_lock lock(mu_);
    return index_.count(cid) != 0;
  }

  ChunkStoreStats stats() const override {
    std::shared_lock lock(mu_);
    ChunkStoreStats s = stats_;
    s.log_file_bytes = end_;
    return s;
  }

  Extent extent(const Cid& cid) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(cid);
    if (it == index_.end()) throw Error(ErrorCode::NotFound, "chunk " + cid.hex() + " not found");
    return it->second;
  }

  /// Replays the log in append order.
  LogScanReport scan_log(const std::function<void(const Cid&, const Chunk&)>& fn) const {
    return scan_chunk_log(file_, algo_, [&](const Cid& cid, Chunk&& c, std::uint64_t) { fn(cid, c); });
  }

  /// Report from the recovery scan performed at open.
  const LogScanReport& recovery_report() const { return recovery_; }

  void sync() { file_.sync(); }

  /// Persists the cid -> extent sidecar so the next open skips most of the scan.
  void write_index() {
    std::shared_lock lock(mu_);
    ByteWriter w;
    w.raw(std::string_view(kIndexMagic, 4));
    w.u64(end_);
    w.u64(index_.size());
    for (const auto& [cid, ext] : index_) {
      w.raw(cid.view());
      w.u64(ext.offset);
      w.u32(ext.length);
    }
    const fs::path tmp = dir_ / "chunks.idx.tmp";
    {
      detail::File f(tmp, O_WRONLY | O_CREAT | O_TRUNC);
      f.write_at(0, w.bytes().data(), w.size());
    }
    fs::rename(tmp, dir_ / "chunks.idx");
  }

  const fs::path& directory() const { return dir_; }

 private:
  void recover() {
    std::uint64_t from = kLogHeaderSize;
    const std::uint64_t size = file_.size();
    if (auto covered = load_index(size)) from = *covered;
    recovery_ = scan_chunk_log(file_, algo_, [&](const Cid& cid, Chunk&& c, std::uint64_t off) {
      if (index_.count(cid)) return;
      index_.emplace(cid, Extent{off, static_cast<std::uint32_t>(kChunkHeaderSize + c.payload.size()), c.type});
      stats_.account(c);
    }, from);
    end_ = recovery_.valid_end;
    if (recovery_.truncated && !opts_.read_only) file_.truncate(end_);
  }

  // Returns the log offset covered by a usable sidecar, if any.
  std::optional<std::uint64_t> load_index(std::uint64_t log_size) {
    const fs::path p = dir_ / "chunks.idx";
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    try {
      detail::File f(p, O_RDONLY);
      Bytes data(f.size());
      f.read_at(0, data.data(), data.size());
      ByteReader r(data);
      if (std::memcmp(r.raw(4).data(), kIndexMagic, 4) != 0) return std::nullopt;
      const std::uint64_t covered = r.u64();
      if (covered > log_size || covered < kLogHeaderSize) return std::nullopt;
      const std::uint64_t n = r.u64();
      std::unordered_map<Cid, Extent, CidHash> loaded;
      loaded.reserve(n);
      ChunkStoreStats st;
      for (std::uint64_t i = 0; i < n; ++i) {
        Cid cid = Cid::from_view(r.raw(Cid::kSize));
        Extent e;
        e.offset = r.u64();
        e.length = r.u32();
        if (e.offset + e.length > covered || e.length < kChunkHeaderSize) return std::nullopt;
        std::uint8_t header[kChunkHeaderSize];
        file_.read_at(e.offset, header, kChunkHeaderSize);
        e.type = valid_chunk_type(header[1]) ? static_cast<ChunkType>(header[1]) : ChunkType::Blob;
        ++st.unique_chunk_count;
        st.total_payload_bytes += e.length - kChunkHeaderSize;
        ++st.chunks_by_type[static_cast<std::size_t>(e.type)];
        st.payload_bytes_by_type[static_cast<std::size_t>(e.type)] += e.length - kChunkHeaderSize;
        loaded.emplace(cid, e);
      }
      index_ = std::move(loaded);
      stats_ = st;
      return covered;
    } catch (const Error&) {
      index_.clear();
      stats_ = {};
      return std::nullopt;
    }
  }

  fs::path dir_;
  Options opts_;
  DigestAlgorithm algo_ = DigestAlgorithm::Sha256;
  detail::File file_;
  mutable std::shared_mutex mu_;
  std::unordered_map<Cid, Extent, CidHash> index_;
  std::uint64_t end_ = kLogHeaderSize;
  ChunkStoreStats stats_;
  LogScanReport recovery_;
};

}  // namespace forkstore
