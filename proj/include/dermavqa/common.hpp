#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dvqa {

// Error taxonomy maps onto the CLI exit-code contract:
// config/input problems -> 2, runtime/backend problems -> 1.
enum class ErrorKind { ConfigInput, Runtime };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorKind::ConfigInput, msg) {}
};

// Malformed input file contents (bad schema, unparseable field).
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(ErrorKind::ConfigInput, msg) {}
};

// Inputs parse but violate a cross-record invariant (duplicate ids, dangling refs).
struct IntegrityError : Error {
    explicit IntegrityError(const std::string& msg) : Error(ErrorKind::ConfigInput, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::Runtime, msg) {}
};

struct BackendError : Error {
    explicit BackendError(const std::string& msg) : Error(ErrorKind::Runtime, msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(ErrorKind::Runtime, msg) {}
};

// A documented caller-side precondition was violated.
struct PreconditionError : Error {
    explicit PreconditionError(const std::string& msg) : Error(ErrorKind::Runtime, msg) {}
};

// ---- logging ----------------------------------------------------------

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Silent = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
void log_msg(LogLevel level, const std::string& msg);

inline void log_debug(const std::string& msg) { log_msg(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log_msg(LogLevel::Warn, msg); }
inline void log_error(const std::string& msg) { log_msg(LogLevel::Error, msg); }

// ---- string helpers ---------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
// Collapses runs of whitespace to single spaces and trims the ends.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view s, std::string_view prefix);
// Removes every occurrence of `needle` (case-insensitive ASCII match).
std::string remove_all_ci(std::string_view s, std::string_view needle);
bool contains_ci(std::string_view s, std::string_view needle);

// ---- hashing / seeding -------------------------------------------------

// FNV-1a, used for stable content ids and seed material. Not cryptographic.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

std::string base64_encode(std::string_view data);

// ---- file helpers ------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace dvqa
