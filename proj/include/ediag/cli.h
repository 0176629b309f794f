#ifndef EDIAG_CLI_H_
#define EDIAG_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace ediag {

// Runs one `ediag` invocation. `args` excludes the program name.
// Returns 0 on success, 1 on a domain error (one `ediag: <Code>: <message>`
// line on `err`), 2 on a usage error.
int Dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace ediag

#endif  // EDIAG_CLI_H_
