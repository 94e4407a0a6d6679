#ifndef DUALGAME_ERRORS_HPP
#define DUALGAME_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dualgame {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
   using std::runtime_error::runtime_error;
};

/// A precondition on the arguments of an operation does not hold.
class DomainError : public Error {
  public:
   using Error::Error;
};

/// A value object would violate one of its invariants.
class InvariantError : public Error {
  public:
   using Error::Error;
};

/// An enumeration or grid would exceed a configured budget.
class ResourceError : public Error {
  public:
   ResourceError(const std::string& what, std::size_t count, std::size_t cap)
       : Error(what + " (count " + std::to_string(count) + " exceeds cap " + std::to_string(cap)
               + ")"),
         m_count(count),
         m_cap(cap)
   {
   }

   [[nodiscard]] std::size_t count() const noexcept { return m_count; }
   [[nodiscard]] std::size_t cap() const noexcept { return m_cap; }

  private:
   std::size_t m_count;
   std::size_t m_cap;
};

/// A linear program turned out infeasible or unbounded.
class LpError : public Error {
  public:
   using Error::Error;
};

/// Malformed game-file text. Line and column are 1-based; column 0 means "whole line".
class ParseError : public Error {
  public:
   ParseError(std::size_t line, std::size_t column, const std::string& message)
       : Error("line " + std::to_string(line)
               + (column > 0 ? ", column " + std::to_string(column) : std::string{}) + ": "
               + message),
         m_line(line),
         m_column(column)
   {
   }

   [[nodiscard]] std::size_t line() const noexcept { return m_line; }
   [[nodiscard]] std::size_t column() const noexcept { return m_column; }

  private:
   std::size_t m_line;
   std::size_t m_column;
};

}  // namespace dualgame

#endif  // DUALGAME_ERRORS_HPP
