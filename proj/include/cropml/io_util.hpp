#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cropml/common.hpp"

namespace cropml {

namespace fs = std::filesystem;

// Atomic write: stage into a .tmp sibling, then rename over the target.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw UnreadableFile("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableFile(path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// FNV-1a over file bytes; cheap content digest for the run manifest.
inline std::string content_digest(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Held for the duration of a command; rejects concurrent runs on one out-dir.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) : lock_(dir / ".cropml.lock") {
        fs::create_directories(dir);
        if (fs::exists(lock_)) throw UnreadableFile("out-dir locked: " + lock_.string());
        std::ofstream(lock_) << "locked\n";
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(lock_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path lock_;
};

}  // namespace cropml
