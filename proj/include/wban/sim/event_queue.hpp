#pragma once

#include <cstdint>
#include <queue>
#include <vector>

namespace wban::sim {

enum class EventKind {
  PacketArrival,
  BackoffExpiry,
  CcaResult,
  TxEnd,
  AckTimeout,
  WakeupTick,
  EstTick,
  TraceAdvance,
};

enum class Radio { Rf, Bcc };

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::PacketArrival;
  int node = 0;
  Radio radio = Radio::Rf;
};

// Pops in (time, seq) order; seq is assigned at insertion.
class EventQueue {
 public:
  void push(double time, EventKind kind, int node, Radio radio = Radio::Rf) {
    heap_.push(Event{time, next_seq_++, kind, node, radio});
  }
  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    return e;
  }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace wban::sim
