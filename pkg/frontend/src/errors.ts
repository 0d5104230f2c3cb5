/** Typed errors raised by the bindings. */

export class TrajtokBindingError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** The artifact's format/version does not match what these bindings support. */
export class VersionMismatchError extends TrajtokBindingError {}

/** An input vector's dimension does not match the loaded artifact. */
export class DimensionMismatchError extends TrajtokBindingError {}

/** Malformed data: bad distributions, empty sequences, invalid groups. */
export class DataFormatError extends TrajtokBindingError {}
