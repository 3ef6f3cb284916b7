#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mob::ext {

// Prebound external service numbers.
inline constexpr long long kFileExec = 1;
inline constexpr long long kIO = 2;
inline constexpr long long kFTP = 4;

// Mock behaviour configured per run.
struct ExternConfig {
    std::map<std::string, std::string> fileexecOutputs; // exact command -> output
    std::vector<std::string> ioInput;                   // console input lines
    std::map<std::string, std::string> ftpFiles;        // file name -> content
};

// Raised for misuse of the external hub; the machine converts these into
// runtime errors of the same kind.
struct ExternError : std::runtime_error {
    ExternError(std::string kind, const std::string& message)
        : std::runtime_error(message), kind(std::move(kind)) {}
    std::string kind;
};

// Result of one exec call.
struct ExecResult {
    enum class Kind { Int, Str, Bool };
    Kind kind;
    long long i = 0;
    std::string s;
    bool b = false;

    static ExecResult ofInt(long long v) { return {Kind::Int, v, {}, false}; }
    static ExecResult ofStr(std::string v) { return {Kind::Str, 0, std::move(v), false}; }
    static ExecResult ofBool(bool v) { return {Kind::Bool, 0, {}, v}; }
};

// Synchronous hub dispatching every exec call of a run. Sessions are owned by
// the agent that opened them; write output is collected per owner.
class Hub {
public:
    explicit Hub(ExternConfig cfg);

    // action: "init" | "read" | "readLine" | "write" | "isAlive" | "action" | "close"
    // id: service number for init, session id otherwise.
    // ownerKey: display key of the calling agent, e.g. "a3".
    ExecResult exec(const std::string& action, long long id, const std::string& payload,
                    const std::string& ownerKey);

    const std::vector<std::string>& fileexecLog() const { return fileexecLog_; }
    const std::map<std::string, std::vector<std::string>>& ioWrites() const { return ioWrites_; }

    // Every exec call in order, with its result (for tests and debugging).
    struct CallRecord {
        std::string action;
        long long id = 0;
        std::string payload;
        ExecResult result;
    };
    const std::vector<CallRecord>& calls() const { return calls_; }

    // Writes fileexec.txt and io-<agent>.txt transcripts (only non-empty ones).
    void writeTranscripts(const std::filesystem::path& dir) const;

private:
    struct Session {
        long long service = 0;
        std::string owner;
        bool alive = true;
        std::string buffer;
        std::size_t pos = 0;
    };

    Session& liveSession(long long id, const std::string& action);
    ExecResult execImpl(const std::string& action, long long id, const std::string& payload,
                        const std::string& ownerKey);

    ExternConfig cfg_;
    std::map<long long, Session> sessions_;
    long long nextId_ = 1;
    std::vector<std::string> fileexecLog_;
    std::map<std::string, std::vector<std::string>> ioWrites_;
    std::vector<CallRecord> calls_;
};

} // namespace mob::ext
