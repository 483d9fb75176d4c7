#include "conav/types.hpp"

namespace conav {

std::string to_string(Action a) {
  switch (a) {
    case Action::MoveForward: return "MoveForward";
    case Action::TurnRight90: return "TurnRight90";
    case Action::TurnLeft90: return "TurnLeft90";
    case Action::Stop: return "Stop";
  }
  throw std::logic_error("unknown Action");
}

Action action_from_string(const std::string& s) {
  if (s == "MoveForward") return Action::MoveForward;
  if (s == "TurnRight90") return Action::TurnRight90;
  if (s == "TurnLeft90") return Action::TurnLeft90;
  if (s == "Stop") return Action::Stop;
  throw std::invalid_argument("not an action: " + s);
}

bool is_turn(Action a) {
  return a == Action::TurnRight90 || a == Action::TurnLeft90;
}

int normalize_heading(int deg) {
  int h = deg % 360;
  if (h < 0) h += 360;
  return h;
}

std::pair<int, int> heading_unit(int heading) {
  switch (normalize_heading(heading)) {
    case 0: return {1, 0};
    case 90: return {0, 1};
    case 180: return {-1, 0};
    case 270: return {0, -1};
  }
  throw std::invalid_argument("heading must be cardinal, got " +
                              std::to_string(heading));
}

double norm180(double deg) {
  double d = std::fmod(deg + 180.0, 360.0);
  if (d < 0) d += 360.0;
  return d - 180.0;
}

double bearing_from(const Pose& pose, double tx, double ty) {
  double abs_deg =
      std::atan2(ty - pose.y, tx - pose.x) * 180.0 / 3.14159265358979323846;
  return norm180(abs_deg - static_cast<double>(pose.heading));
}

double euclid(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

std::string to_string(ViewDir v) {
  switch (v) {
    case ViewDir::Front: return "Front";
    case ViewDir::Right: return "Right";
    case ViewDir::Back: return "Back";
    case ViewDir::Left: return "Left";
  }
  throw std::logic_error("unknown ViewDir");
}

ViewDir view_from_string(const std::string& s) {
  if (s == "Front") return ViewDir::Front;
  if (s == "Right") return ViewDir::Right;
  if (s == "Back") return ViewDir::Back;
  if (s == "Left") return ViewDir::Left;
  throw std::invalid_argument("not a view direction: " + s);
}

double view_center(ViewDir v) {
  switch (v) {
    case ViewDir::Front: return 0.0;
    case ViewDir::Right: return -90.0;
    case ViewDir::Back: return 180.0;
    case ViewDir::Left: return 90.0;
  }
  throw std::logic_error("unknown ViewDir");
}

}  // namespace conav
