// CLI shim exposing a pinned soljson (npm "solc" package) module through the
// native solc command-line contract the harness expects: --version, and
// --standard-json over stdin/stdout.
const modulePath = process.argv[2];
const solc = require(modulePath);
const mode = process.argv[3] || '--standard-json';

if (mode === '--version') {
  process.stdout.write(
    'solc, the solidity compiler commandline interface\nVersion: ' +
    solc.version() + '\n');
  process.exit(0);
}
if (mode !== '--standard-json') {
  process.stderr.write('unsupported mode: ' + mode + '\n');
  process.exit(2);
}

let chunks = [];
process.stdin.on('data', (c) => chunks.push(c));
process.stdin.on('end', () => {
  const input = Buffer.concat(chunks).toString('utf8');
  process.stdout.write(solc.compile(input));
});
