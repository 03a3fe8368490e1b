/** Typed errors mirroring the CLI's exit-code contract one-to-one. */

export class CellsegError extends Error {
  constructor(
    message: string,
    readonly exitCode: number,
  ) {
    super(message);
    this.name = new.target.name;
  }
}

/** Exit 2: bad flags or an invalid request (negative h, bad manifest, ...). */
export class InvalidRequestError extends CellsegError {}

/** Exit 3: missing files, unsupported or corrupt formats. */
export class IoError extends CellsegError {}

/** Exit 4: images that must share dimensions do not. */
export class DimensionMismatchError extends CellsegError {}

/** Exit 5: Pearson correlation of a constant image. */
export class ConstantImageError extends CellsegError {}

export function errorForExit(code: number, stderr: string): CellsegError {
  const message = stderr.trim() || `cellseg exited with code ${code}`;
  switch (code) {
    case 2:
      return new InvalidRequestError(message, code);
    case 3:
      return new IoError(message, code);
    case 4:
      return new DimensionMismatchError(message, code);
    case 5:
      return new ConstantImageError(message, code);
    default:
      return new CellsegError(message, code);
  }
}
