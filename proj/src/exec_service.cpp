#include "mob/exec_service.hpp"

#include <cctype>
#include <fstream>

namespace mob::ext {

Hub::Hub(ExternConfig cfg) : cfg_(std::move(cfg)) {}

Hub::Session& Hub::liveSession(long long id, const std::string& action) {
    auto it = sessions_.find(id);
    if (it == sessions_.end() || !it->second.alive)
        throw ExternError("DeadSession",
                          "'" + action + "' on closed or unknown session " + std::to_string(id));
    return it->second;
}

ExecResult Hub::exec(const std::string& action, long long id, const std::string& payload,
                     const std::string& ownerKey) {
    ExecResult r = execImpl(action, id, payload, ownerKey);
    calls_.push_back(CallRecord{action, id, payload, r});
    return r;
}

ExecResult Hub::execImpl(const std::string& action, long long id, const std::string& payload,
                         const std::string& ownerKey) {
    if (action == "init") {
        Session s;
        s.service = id;
        s.owner = ownerKey;
        switch (id) {
        case kFileExec: {
            fileexecLog_.push_back(payload);
            auto it = cfg_.fileexecOutputs.find(payload);
            if (it != cfg_.fileexecOutputs.end()) s.buffer = it->second;
            break;
        }
        case kIO: {
            for (const auto& line : cfg_.ioInput) s.buffer += line + "\n";
            break;
        }
        case kFTP:
            break; // payload names the remote host; files are staged via action
        default:
            throw ExternError("UnknownService",
                              "init with unknown service number " + std::to_string(id));
        }
        long long sid = nextId_++;
        sessions_.emplace(sid, std::move(s));
        return ExecResult::ofInt(sid);
    }

    if (action == "isAlive") {
        auto it = sessions_.find(id);
        return ExecResult::ofBool(it != sessions_.end() && it->second.alive);
    }

    if (action == "close") {
        auto it = sessions_.find(id);
        if (it == sessions_.end() || !it->second.alive) return ExecResult::ofBool(false);
        it->second.alive = false;
        return ExecResult::ofBool(true);
    }

    if (action == "read") {
        Session& s = liveSession(id, action);
        std::size_t want = 0;
        try {
            std::size_t used = 0;
            long long n = std::stoll(payload, &used);
            if (n < 0 || used != payload.size())
                throw ExternError("UnknownAction", "read count must be a non-negative integer");
            want = static_cast<std::size_t>(n);
        } catch (const std::invalid_argument&) {
            throw ExternError("UnknownAction", "read count must be a non-negative integer");
        } catch (const std::out_of_range&) {
            throw ExternError("UnknownAction", "read count out of range");
        }
        std::size_t avail = s.buffer.size() - s.pos;
        std::size_t take = want < avail ? want : avail;
        std::string out = s.buffer.substr(s.pos, take);
        s.pos += take;
        return ExecResult::ofStr(std::move(out));
    }

    if (action == "readLine") {
        Session& s = liveSession(id, action);
        if (s.pos >= s.buffer.size()) return ExecResult::ofStr("");
        std::size_t nl = s.buffer.find('\n', s.pos);
        std::string out;
        if (nl == std::string::npos) {
            out = s.buffer.substr(s.pos);
            s.pos = s.buffer.size();
        } else {
            out = s.buffer.substr(s.pos, nl - s.pos);
            s.pos = nl + 1;
        }
        return ExecResult::ofStr(std::move(out));
    }

    if (action == "write") {
        Session& s = liveSession(id, action);
        ioWrites_[s.owner].push_back(payload);
        return ExecResult::ofBool(true);
    }

    if (action == "action") {
        Session& s = liveSession(id, action);
        if (s.service != kFTP)
            throw ExternError("UnknownAction", "'action' is only supported on ftp sessions");
        if (payload.rfind("GET ", 0) != 0)
            throw ExternError("UnknownAction", "unsupported ftp action '" + payload + "'");
        std::string name = payload.substr(4);
        auto it = cfg_.ftpFiles.find(name);
        if (it == cfg_.ftpFiles.end()) return ExecResult::ofBool(false);
        s.buffer = it->second;
        s.pos = 0;
        return ExecResult::ofBool(true);
    }

    throw ExternError("UnknownAction", "unknown exec action '" + action + "'");
}

void Hub::writeTranscripts(const std::filesystem::path& dir) const {
    if (fileexecLog_.empty() && ioWrites_.empty()) return;
    std::filesystem::create_directories(dir);
    if (!fileexecLog_.empty()) {
        std::ofstream f(dir / "fileexec.txt");
        for (const auto& line : fileexecLog_) f << line << '\n';
    }
    for (const auto& [owner, lines] : ioWrites_) {
        std::ofstream f(dir / ("io-" + owner + ".txt"));
        for (const auto& line : lines) f << line << '\n';
    }
}

} // namespace mob::ext
