/** Strict reader for the simulator's numeric CSV outputs. */

export interface Table {
  header: string[];
  columns: Map<string, number[]>;
  rows: number;
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length < 2) {
    throw new Error("CSV needs a header line and at least one data row");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const columns = new Map<string, number[]>(header.map((h) => [h, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new Error(`row ${i} has ${cells.length} cells, header has ${header.length}`);
    }
    for (let j = 0; j < header.length; j++) {
      const v = Number(cells[j]);
      if (!Number.isFinite(v)) {
        throw new Error(`row ${i}, column ${header[j]}: not a finite number: ${cells[j]}`);
      }
      columns.get(header[j])!.push(v);
    }
  }
  return { header, columns, rows: lines.length - 1 };
}

export function requireColumn(table: Table, name: string): number[] {
  const col = table.columns.get(name);
  if (col === undefined) {
    throw new Error(`missing column: ${name}`);
  }
  return col;
}
