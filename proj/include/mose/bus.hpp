#pragma once

// Abstract pub/sub/query bus. Routing lives here; when and how a routed
// message reaches its recipient is up to the Transport.
//
// Topic scheme: mose/{task_id}/{role}/{step}, where {role} is the role that
// publishes on the topic or answers queries on it.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mose {

enum class Role { Source, Destination, Client, Orchestrator };

std::string_view to_string(Role r);

enum class MessageKind { Publish, Query, Reply };

std::string_view to_string(MessageKind k);

struct MessageHeader {
    std::string task_id;
    std::string step;
    int round = -1;
    double image_bytes = 0.0;

    friend bool operator==(const MessageHeader&, const MessageHeader&) = default;
};

struct BusMessage {
    std::uint64_t id = 0;               // assigned by the bus
    MessageKind kind = MessageKind::Publish;
    std::string topic;
    std::string sender;
    MessageHeader header;
    std::string payload;
    std::string correlation_id;         // Query: chosen by the sender; Reply: copied from the Query
    double timestamp_s = 0.0;           // send time
    bool bulk = false;                  // Reply carrying a checkpoint image
    double bulk_bytes = 0.0;

    friend bool operator==(const BusMessage&, const BusMessage&) = default;
};

std::string make_topic(std::string_view task_id, Role role, std::string_view step);

/// Segment-wise match; "*" matches one segment, a trailing "**" any suffix.
bool topic_matches(std::string_view pattern, std::string_view topic);

class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(const std::string& recipient, const BusMessage& message) = 0;
};

/// Delivers in send order with no delay; used where timing is irrelevant.
class QueueTransport : public Transport {
public:
    void send(const std::string& recipient, const BusMessage& message) override
    {
        queue_.emplace_back(recipient, message);
    }
    std::optional<std::pair<std::string, BusMessage>> pop();
    bool empty() const { return queue_.empty(); }

private:
    std::deque<std::pair<std::string, BusMessage>> queue_;
};

class Bus {
public:
    explicit Bus(Transport& transport) : transport_(transport) {}

    void subscribe(const std::string& agent, std::string pattern);
    void declare_queryable(const std::string& agent, std::string pattern);

    /// Route and hand to the transport. Returns the recipients; the message
    /// id is written back into `message`. Publications reach every matching
    /// subscriber other than the sender, queries the first matching
    /// queryable, replies the agent that issued the correlated query.
    std::vector<std::string> send(BusMessage& message);

    std::uint64_t sent_count() const { return next_id_ - 1; }

private:
    Transport& transport_;
    std::vector<std::pair<std::string, std::string>> subscriptions_;
    std::vector<std::pair<std::string, std::string>> queryables_;
    std::map<std::string, std::string> query_origin_;
    std::uint64_t next_id_ = 1;
};

}  // namespace mose
