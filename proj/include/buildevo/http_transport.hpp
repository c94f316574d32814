#pragma once

#include <memory>
#include <string>

#include "httplib.h"

#include "buildevo/provider.hpp"

// Real-socket HttpTransport. Kept out of provider.hpp so the test suite can
// exercise HttpProvider against a fake transport without compiling httplib.

namespace buildevo {

class HttplibTransport : public HttpTransport {
public:
    HttpResult post(const std::string& base_url, const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body, int timeout_sec) override {
        std::string origin = base_url;
        std::string prefix;
        const size_t scheme = origin.find("://");
        const size_t host_begin = scheme == std::string::npos ? 0 : scheme + 3;
        const size_t slash = origin.find('/', host_begin);
        if (slash != std::string::npos) {
            prefix = origin.substr(slash);
            origin.erase(slash);
        }
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

        httplib::Client client(origin);
        client.set_connection_timeout(timeout_sec, 0);
        client.set_read_timeout(timeout_sec, 0);
        client.set_write_timeout(timeout_sec, 0);
        httplib::Headers hs;
        for (const auto& [k, v] : headers) hs.emplace(k, v);

        auto res = client.Post(prefix + path, hs, body, "application/json");
        HttpResult out;
        if (!res) {
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }
};

inline std::shared_ptr<HttpTransport> make_httplib_transport() {
    return std::make_shared<HttplibTransport>();
}

}  // namespace buildevo
