/**
 * Parser for the service's CSV dialect: UTF-8, comma delimiter, double-quote
 * quoting with doubled-quote escape, `\n` line ends, first row is the header.
 * Cells come back as raw strings; the client never retypes or transforms data.
 */
export interface ParsedTable {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): ParsedTable {
  const records: string[][] = [];
  let record: string[] = [];
  let cell = '';
  let inQuotes = false;
  let sawAny = false;
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          cell += '"';
          i++;
        } else {
          inQuotes = false;
        }
      } else {
        cell += ch;
      }
      continue;
    }
    if (ch === '"') {
      inQuotes = true;
      sawAny = true;
    } else if (ch === ',') {
      record.push(cell);
      cell = '';
      sawAny = true;
    } else if (ch === '\n') {
      record.push(cell);
      records.push(record);
      record = [];
      cell = '';
      sawAny = false;
    } else {
      cell += ch;
      sawAny = true;
    }
  }
  if (inQuotes) throw new Error('unterminated quoted field');
  if (sawAny || record.length > 0) {
    record.push(cell);
    records.push(record);
  }
  if (records.length === 0) throw new Error('empty CSV document');
  const [header, ...rows] = records;
  return { header, rows };
}
