#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <sstream>

#include "safepatch/datagen.hpp"

namespace safepatch {

// Bidirectional pipe to a child shell command.
struct ExternalRewriter::Proc {
    FILE* to_child = nullptr;
    FILE* from_child = nullptr;
    pid_t pid = -1;

    explicit Proc(const std::string& command) {
        int in_pipe[2];   // parent -> child
        int out_pipe[2];  // child -> parent
        if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
            throw IoError("rewriter: pipe() failed");
        pid = fork();
        if (pid < 0)
            throw IoError("rewriter: fork() failed");
        if (pid == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            close(in_pipe[0]);
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(out_pipe[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        to_child = fdopen(in_pipe[1], "w");
        from_child = fdopen(out_pipe[0], "r");
        if (!to_child || !from_child)
            throw IoError("rewriter: fdopen() failed");
    }

    ~Proc() {
        if (to_child) fclose(to_child);
        if (from_child) fclose(from_child);
        if (pid > 0) waitpid(pid, nullptr, 0);
    }
};

ExternalRewriter::ExternalRewriter(const std::string& command)
    : proc_(std::make_unique<Proc>(command)) {}

ExternalRewriter::~ExternalRewriter() = default;

std::string ExternalRewriter::roundtrip(const std::string& request) {
    if (fprintf(proc_->to_child, "%s\n", request.c_str()) < 0 || fflush(proc_->to_child) != 0)
        throw IoError("rewriter: write to client failed");
    char buf[8192];
    if (!fgets(buf, sizeof buf, proc_->from_child))
        throw IoError("rewriter: client closed the stream");
    std::string line(buf);
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    if (line.rfind("ERR ", 0) == 0)
        throw InvalidPromptError("rewriter client: " + line.substr(4));
    if (line.rfind("OK", 0) != 0)
        throw IoError("rewriter: malformed client response '" + line + "'");
    return line.size() > 3 ? line.substr(3) : std::string();
}

std::vector<PromptTokens> ExternalRewriter::rewrite(const PromptTokens& prompt, int k, Rng&) {
    std::ostringstream req;
    req << "REWRITE " << k << " " << prompt.str();
    const std::string body = roundtrip(req.str());
    std::vector<PromptTokens> out;
    size_t start = 0;
    for (size_t i = 0; i <= body.size(); ++i) {
        if (i == body.size() || body[i] == '|') {
            const std::string part = body.substr(start, i - start);
            if (!part.empty()) out.push_back(PromptTokens(parse_token_list(part)));
            start = i + 1;
        }
    }
    if (static_cast<int>(out.size()) != k)
        throw IoError("rewriter: client returned " + std::to_string(out.size()) +
                      " candidates, expected " + std::to_string(k));
    return out;
}

SafetyCondition ExternalRewriter::condition(const PromptTokens& prompt) {
    const std::string body = roundtrip("CONDITION " + prompt.str());
    return SafetyCondition(parse_token_list(body));
}

} // namespace safepatch
